#pragma once

#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "tdae/error.hpp"
#include "tdae/hilbert.hpp"
#include "tdae/ode.hpp"
#include "tdae/types.hpp"

namespace tdae {

enum class Method { rk45, expm };
const char* to_string(Method m);
Method method_from_string(const std::string& s);

struct IntegratorConfig {
  double rtol = 1e-9;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double initial_step = 0.0;
  double fixed_step = 0.0;  // > 0 disables step control
  bool dense_output = true;
  Method method = Method::rk45;
  unsigned threads = 1;
  double truncation_cap = 1e-10;  // leaked probability per step before the window is doubled
  int max_window_doublings = 4;
  bool keep_states = true;
  // per-family constant removed from the generator and restored as a phase on output
  std::function<double(double p0)> family_offset;
  // cumulative pulse area as a function of time (optional)
  std::function<double(double t)> area;
};

struct TrajectoryResult {
  std::vector<double> times;
  std::vector<StateVector> states;
  std::vector<std::vector<double>> populations;  // [sample][level id], summed over families and sites
  std::vector<double> norms;
  std::vector<double> pulse_area_progress;
  std::vector<double> initial_family_norms;  // norms of psi0 per family
  double truncation_loss = 0.0;
  int window_doublings = 0;
  std::size_t steps = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
};

// Sample times must be sorted and >= t0; the trajectory reports the state at each.
TrajectoryResult evolve(const BlockOperator& H, const StateVector& psi0, const MomentumLadder& ladder, double t0,
                        std::span<const double> times, const IntegratorConfig& cfg = {});

// exp(-i H (t - t0)) psi0 via eigendecomposition; scaling-and-squaring when H is defective.
std::vector<Vector> expm_evolve(const Matrix& H, const Vector& psi0, double t0, std::span<const double> times);

class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string& what) : Error(ErrorKind::alignment, what) {}
};

// delta(t) = sqrt(sum over the given levels |psi_a - psi_b|^2), raw amplitudes.
std::vector<double> relative_error(const TrajectoryResult& a, const TrajectoryResult& b,
                                   std::span<const LevelId> levels);
// Same distance after removing the optimal global phase (not part of the reference metric).
std::vector<double> relative_error_phase_aligned(const TrajectoryResult& a, const TrajectoryResult& b,
                                                 std::span<const LevelId> levels);

struct DensityRow {
  std::size_t sample = 0;
  std::size_t family = 0;
  LevelId level = 0;
  std::int64_t n = 0;
  double momentum = 0.0;  // site momentum, units of hbar k_ref
  double density = 0.0;   // |amplitude|^2 relative to the family's initial norm
};

std::vector<DensityRow> momentum_density(const TrajectoryResult& traj, const MomentumLadder& ladder);

// Populations per level summed over families and sites.
std::vector<double> level_populations(const StateVector& psi, std::size_t n_levels);

}  // namespace tdae
