#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tdae/types.hpp"

namespace tdae {

using LevelId = int;

struct Level {
  std::string label;
  double omega = 0.0;  // rad/s
  bool relevant = true;
};

class InternalSpace {
 public:
  InternalSpace() = default;
  explicit InternalSpace(std::vector<Level> levels);

  std::size_t size() const { return levels_.size(); }
  const Level& level(LevelId id) const { return levels_.at(static_cast<std::size_t>(id)); }
  const std::vector<Level>& levels() const { return levels_; }
  LevelId index(std::string_view label) const;
  std::optional<LevelId> find(std::string_view label) const;
  bool is_relevant(LevelId id) const { return level(id).relevant; }
  std::vector<LevelId> relevant() const;
  std::vector<LevelId> irrelevant() const;

 private:
  std::vector<Level> levels_;
};

// Momenta are in units of hbar*k_ref; a ladder step is hbar*k_ref/M.
struct MomentumLadder {
  double k_ref = 1.0;
  std::int64_t M = 1;
  std::vector<double> base_momenta{0.0};
  std::vector<std::int64_t> generators;
  std::int64_t n_min = -8;
  std::int64_t n_max = 8;
  double omega_ref = 0.0;  // hbar k_ref^2 / 2m, rad/s

  double momentum(double p0, std::int64_t n) const {
    return p0 + static_cast<double>(n) / static_cast<double>(M);
  }
  double kinetic(double p) const { return omega_ref * p * p; }
  void validate() const;
};

struct Commensuration {
  std::int64_t M = 1;
  std::vector<std::int64_t> steps;
  double max_residual = 0.0;  // max |M*kappa - steps| / |M*kappa|
};

// kappas are k_j / k_ref. Each kappa is approximated by continued-fraction
// convergents; M is the lcm of the per-wavevector denominators.
Commensuration commensurate(std::span<const double> kappas, double rel_tol = 1e-9,
                            std::int64_t max_M = 4'000'000'000'000LL);

struct Site {
  LevelId level = 0;
  std::int64_t n = 0;
  auto operator<=>(const Site&) const = default;
};

class LadderBasis {
 public:
  LadderBasis() = default;
  LadderBasis(std::vector<Site> sites, std::int64_t n_min, std::int64_t n_max);

  static LadderBasis dense(std::span<const LevelId> levels, std::int64_t n_min, std::int64_t n_max);

  std::size_t size() const { return sites_.size(); }
  const Site& site(std::size_t i) const { return sites_[i]; }
  const std::vector<Site>& sites() const { return sites_; }
  std::optional<std::size_t> find(const Site& s) const;
  std::int64_t n_min() const { return n_min_; }
  std::int64_t n_max() const { return n_max_; }
  bool in_window(std::int64_t n) const { return n >= n_min_ && n <= n_max_; }

 private:
  std::vector<Site> sites_;
  std::int64_t n_min_ = 0;
  std::int64_t n_max_ = 0;
};

// Amplitudes are stored family-major: one contiguous block per base momentum.
class StateVector {
 public:
  StateVector() = default;
  StateVector(std::shared_ptr<const LadderBasis> basis, std::vector<double> base_momenta,
              double norm_tolerance = 1e-10);

  const LadderBasis& basis() const { return *basis_; }
  std::shared_ptr<const LadderBasis> basis_ptr() const { return basis_; }
  const std::vector<double>& base_momenta() const { return base_momenta_; }
  std::size_t families() const { return base_momenta_.size(); }
  std::size_t sites() const { return basis_ ? basis_->size() : 0; }
  std::size_t size() const { return amps_.size(); }

  std::span<cplx> family(std::size_t f) { return {amps_.data() + f * sites(), sites()}; }
  std::span<const cplx> family(std::size_t f) const { return {amps_.data() + f * sites(), sites()}; }
  cplx& at(std::size_t f, std::size_t i) { return amps_[f * sites() + i]; }
  cplx at(std::size_t f, std::size_t i) const { return amps_[f * sites() + i]; }
  cplx get(std::size_t f, const Site& s) const;
  void set(std::size_t f, const Site& s, cplx v);

  std::vector<cplx>& data() { return amps_; }
  const std::vector<cplx>& data() const { return amps_; }

  double norm() const;
  double family_norm(std::size_t f) const;
  bool finite() const;

  double norm_tolerance = 1e-10;

 private:
  std::shared_ptr<const LadderBasis> basis_;
  std::vector<double> base_momenta_;
  std::vector<cplx> amps_;
};

// psi'(row, p + shift) += coeff(p, t) * psi(col, p); p is the pre-shift momentum.
struct LadderTerm {
  LevelId row = 0;
  LevelId col = 0;
  std::int64_t shift = 0;
  std::function<cplx(double p, double t)> coeff;
};

// Momentum-independent matrix acting on a set of levels at every ladder index.
struct DenseTerm {
  std::vector<LevelId> levels;
  MatrixFn matrix;
};

struct BlockOperator {
  std::vector<LadderTerm> terms;
  std::vector<DenseTerm> dense;
  bool time_dependent = true;

  BlockOperator adjoint(const MomentumLadder& ladder) const;
  std::vector<LevelId> levels() const;
};

// Operator bound to a basis: precomputed source/destination tables.
class CompiledOperator {
 public:
  CompiledOperator(const BlockOperator& op, std::shared_ptr<const LadderBasis> basis,
                   const MomentumLadder& ladder);

  // y = H(t) x on one family; returns the squared norm of contributions that leave the basis.
  double apply(double t, double p0, std::span<const cplx> x, std::span<cplx> y) const;
  Matrix assemble(double t, double p0) const;
  const LadderBasis& basis() const { return *basis_; }

 private:
  struct Link {
    std::size_t src;
    std::size_t dst;  // npos when outside the basis
    std::int64_t n;
  };
  struct Compiled {
    std::size_t term;
    std::vector<Link> links;
  };
  struct CompiledDense {
    std::size_t term;
    std::vector<std::vector<std::size_t>> blocks;  // per ladder index, basis slot of each level (npos if absent)
  };
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  BlockOperator op_;
  std::shared_ptr<const LadderBasis> basis_;
  MomentumLadder ladder_;
  std::vector<Compiled> compiled_;
  std::vector<CompiledDense> dense_;
};

// Closure of the seeds under the operator's shifts, restricted to the window.
LadderBasis reachable_basis(const BlockOperator& op, std::span<const Site> seeds, std::int64_t n_min,
                            std::int64_t n_max);

struct ShiftResult {
  StateVector state;
  double truncation_loss = 0.0;
};

ShiftResult plane_wave_shift(std::int64_t k_steps, const StateVector& state,
                             double loss_cap = std::numeric_limits<double>::infinity());

StateVector apply(const BlockOperator& block, double t, const StateVector& state, const MomentumLadder& ladder,
                  double loss_cap = std::numeric_limits<double>::infinity());

struct ShiftCheckParams {
  double omega_ref = 1.0;  // hbar k_ref^2 / 2m
  std::int64_t M = 1;
  double omega1 = 0.0;
  double omega2 = 0.0;
};

// Both sides of exp(-iT(K+w2)) exp(ikx) exp(iT(K+w1)) = exp(ikx) exp(-iT(dw + nu + w_r)) on |p>.
std::pair<cplx, cplx> conjugate_shift_check(double T, std::int64_t k_steps, double p, const ShiftCheckParams& prm);

}  // namespace tdae
