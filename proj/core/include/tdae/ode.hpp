#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "tdae/types.hpp"

namespace tdae {

struct DP45Options {
  double rtol = 1e-9;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double initial_step = 0.0;
  double fixed_step = 0.0;  // > 0 disables step-size control
  std::size_t max_steps = 100'000'000;
};

struct DP45Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
  double min_step = std::numeric_limits<double>::infinity();
  double max_step = 0.0;
};

using OdeRhs = std::function<void(double t, std::span<const cplx> y, std::span<cplx> dy)>;
using OdeSample = std::function<void(std::size_t index, double t, std::span<const cplx> y)>;
using OdeStep = std::function<void(double t, double h, std::span<const cplx> y)>;

// Dormand-Prince 5(4) with FSAL and the 4th-order continuous extension used for
// sample times that fall inside a step. samples must be sorted and >= t0; y is
// advanced to the last sample.
DP45Stats dormand_prince(const OdeRhs& f, double t0, std::vector<cplx>& y, std::span<const double> samples,
                         const OdeSample& on_sample, const DP45Options& opt, const OdeStep& on_step = {});

}  // namespace tdae
