#include "tdae/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <set>

#include "tdae/error.hpp"

namespace tdae {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::truncation: return "truncation";
    case ErrorKind::pole: return "pole";
    case ErrorKind::quadrature: return "quadrature";
    case ErrorKind::calibration: return "calibration";
    case ErrorKind::decomposition: return "decomposition";
    case ErrorKind::inversion: return "inversion";
    case ErrorKind::grid: return "grid";
    case ErrorKind::stiffness: return "stiffness";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::validity: return "validity";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

InternalSpace::InternalSpace(std::vector<Level> levels) : levels_(std::move(levels)) {
  std::set<std::string> seen;
  bool any_relevant = false;
  for (const auto& l : levels_) {
    if (!seen.insert(l.label).second) throw Error(ErrorKind::precondition, "duplicate level label '" + l.label + "'");
    any_relevant = any_relevant || l.relevant;
  }
  if (!levels_.empty() && !any_relevant) throw Error(ErrorKind::precondition, "relevant level set is empty");
}

std::optional<LevelId> InternalSpace::find(std::string_view label) const {
  for (std::size_t i = 0; i < levels_.size(); ++i)
    if (levels_[i].label == label) return static_cast<LevelId>(i);
  return std::nullopt;
}

LevelId InternalSpace::index(std::string_view label) const {
  auto id = find(label);
  if (!id) throw Error(ErrorKind::precondition, "unknown level '" + std::string(label) + "'");
  return *id;
}

std::vector<LevelId> InternalSpace::relevant() const {
  std::vector<LevelId> out;
  for (std::size_t i = 0; i < levels_.size(); ++i)
    if (levels_[i].relevant) out.push_back(static_cast<LevelId>(i));
  return out;
}

std::vector<LevelId> InternalSpace::irrelevant() const {
  std::vector<LevelId> out;
  for (std::size_t i = 0; i < levels_.size(); ++i)
    if (!levels_[i].relevant) out.push_back(static_cast<LevelId>(i));
  return out;
}

void MomentumLadder::validate() const {
  if (n_min >= n_max) throw Error(ErrorKind::grid, "ladder window needs n_min < n_max");
  if (M < 1) throw Error(ErrorKind::grid, "commensuration integer must be positive");
  auto sorted = base_momenta;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorKind::grid, "base momenta must be distinct");
}

namespace {

std::int64_t smallest_denominator(double kappa, double rel_tol, std::int64_t max_M) {
  if (kappa == 0.0) return 1;
  double x = std::abs(kappa);
  // convergents h/k of the continued fraction of x
  long double h0 = 1, h1 = std::floor(x), k0 = 0, k1 = 1;
  long double r = x - std::floor(x);
  auto ok = [&](long double k) {
    long double v = k * x;
    return std::abs(v - std::round(v)) <= rel_tol * v;
  };
  if (ok(1)) return 1;
  for (int it = 0; it < 80; ++it) {
    if (r < 1e-300) break;
    long double inv = 1.0L / r;
    long double a = std::floor(inv);
    r = inv - a;
    // semiconvergents between the previous and next convergent
    for (long double s = 1; s <= a; ++s) {
      long double k = s * k1 + k0;
      if (k > static_cast<long double>(max_M)) return -1;
      if (ok(k)) return static_cast<std::int64_t>(k);
    }
    long double h2 = a * h1 + h0, k2 = a * k1 + k0;
    h0 = h1; h1 = h2; k0 = k1; k1 = k2;
  }
  return ok(k1) ? static_cast<std::int64_t>(k1) : -1;
}

}  // namespace

Commensuration commensurate(std::span<const double> kappas, double rel_tol, std::int64_t max_M) {
  Commensuration out;
  std::int64_t M = 1;
  for (double k : kappas) {
    if (!std::isfinite(k)) throw Error(ErrorKind::grid, "non-finite wavevector");
    std::int64_t q = smallest_denominator(k, rel_tol, max_M);
    if (q < 0) throw Error(ErrorKind::grid, "wavevectors incommensurate within tolerance");
    M = std::lcm(M, q);
    if (M > max_M) throw Error(ErrorKind::grid, "commensuration integer exceeds limit");
  }
  out.M = M;
  for (double k : kappas) {
    double v = static_cast<double>(M) * k;
    auto s = static_cast<std::int64_t>(std::llround(v));
    out.steps.push_back(s);
    if (v != 0.0) out.max_residual = std::max(out.max_residual, std::abs(v - static_cast<double>(s)) / std::abs(v));
  }
  return out;
}

LadderBasis::LadderBasis(std::vector<Site> sites, std::int64_t n_min, std::int64_t n_max)
    : sites_(std::move(sites)), n_min_(n_min), n_max_(n_max) {
  if (n_min > n_max) throw Error(ErrorKind::grid, "basis window needs n_min <= n_max");
  std::sort(sites_.begin(), sites_.end());
  sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
  for (const auto& s : sites_)
    if (!in_window(s.n)) throw Error(ErrorKind::grid, "basis site outside the ladder window");
}

LadderBasis LadderBasis::dense(std::span<const LevelId> levels, std::int64_t n_min, std::int64_t n_max) {
  std::vector<Site> sites;
  for (LevelId l : levels)
    for (std::int64_t n = n_min; n <= n_max; ++n) sites.push_back({l, n});
  return LadderBasis(std::move(sites), n_min, n_max);
}

std::optional<std::size_t> LadderBasis::find(const Site& s) const {
  auto it = std::lower_bound(sites_.begin(), sites_.end(), s);
  if (it == sites_.end() || *it != s) return std::nullopt;
  return static_cast<std::size_t>(it - sites_.begin());
}

StateVector::StateVector(std::shared_ptr<const LadderBasis> basis, std::vector<double> base_momenta,
                         double norm_tol)
    : norm_tolerance(norm_tol), basis_(std::move(basis)), base_momenta_(std::move(base_momenta)) {
  if (!basis_) throw Error(ErrorKind::precondition, "state needs a basis");
  if (base_momenta_.empty()) throw Error(ErrorKind::precondition, "state needs at least one family");
  amps_.assign(basis_->size() * base_momenta_.size(), cplx{});
}

cplx StateVector::get(std::size_t f, const Site& s) const {
  auto i = basis_->find(s);
  return i ? at(f, *i) : cplx{};
}

void StateVector::set(std::size_t f, const Site& s, cplx v) {
  auto i = basis_->find(s);
  if (!i) throw Error(ErrorKind::precondition, "site not in basis");
  at(f, *i) = v;
}

double StateVector::norm() const {
  double s = 0.0;
  for (const auto& a : amps_) s += std::norm(a);
  return std::sqrt(s);
}

double StateVector::family_norm(std::size_t f) const {
  double s = 0.0;
  for (const auto& a : family(f)) s += std::norm(a);
  return std::sqrt(s);
}

bool StateVector::finite() const {
  return std::all_of(amps_.begin(), amps_.end(),
                     [](cplx a) { return std::isfinite(a.real()) && std::isfinite(a.imag()); });
}

BlockOperator BlockOperator::adjoint(const MomentumLadder& ladder) const {
  BlockOperator out;
  out.time_dependent = time_dependent;
  for (const auto& t : terms) {
    auto c = t.coeff;
    const double dp = ladder.momentum(0.0, t.shift);
    // the adjoint's pre-shift momentum is the original post-shift momentum
    out.terms.push_back({t.col, t.row, -t.shift, [c, dp](double q, double tt) { return std::conj(c(q - dp, tt)); }});
  }
  for (const auto& d : dense) {
    auto m = d.matrix;
    out.dense.push_back({d.levels, [m](double t) { return Matrix(m(t).adjoint()); }});
  }
  return out;
}

std::vector<LevelId> BlockOperator::levels() const {
  std::set<LevelId> s;
  for (const auto& t : terms) {
    s.insert(t.row);
    s.insert(t.col);
  }
  for (const auto& d : dense) s.insert(d.levels.begin(), d.levels.end());
  return {s.begin(), s.end()};
}

CompiledOperator::CompiledOperator(const BlockOperator& op, std::shared_ptr<const LadderBasis> basis,
                                   const MomentumLadder& ladder)
    : op_(op), basis_(std::move(basis)), ladder_(ladder) {
  const auto& B = *basis_;
  for (std::size_t k = 0; k < op_.terms.size(); ++k) {
    const auto& term = op_.terms[k];
    Compiled c{k, {}};
    for (std::size_t i = 0; i < B.size(); ++i) {
      const Site& s = B.site(i);
      if (s.level != term.col) continue;
      auto dst = B.find({term.row, s.n + term.shift});
      c.links.push_back({i, dst ? *dst : npos, s.n});
    }
    compiled_.push_back(std::move(c));
  }
  for (std::size_t k = 0; k < op_.dense.size(); ++k) {
    const auto& d = op_.dense[k];
    CompiledDense cd{k, {}};
    std::set<std::int64_t> ns;
    for (const auto& s : B.sites()) ns.insert(s.n);
    for (std::int64_t n : ns) {
      std::vector<std::size_t> slots;
      bool any = false;
      for (LevelId l : d.levels) {
        auto i = B.find({l, n});
        slots.push_back(i ? *i : npos);
        any = any || i.has_value();
      }
      if (any) cd.blocks.push_back(std::move(slots));
    }
    dense_.push_back(std::move(cd));
  }
}

double CompiledOperator::apply(double t, double p0, std::span<const cplx> x, std::span<cplx> y) const {
  std::fill(y.begin(), y.end(), cplx{});
  double dropped = 0.0;
  for (const auto& c : compiled_) {
    for (const auto& l : c.links) {
      const cplx a = x[l.src];
      if (a == cplx{}) continue;
      cplx v = op_.terms[c.term].coeff(ladder_.momentum(p0, l.n), t) * a;
      if (l.dst == npos)
        dropped += std::norm(v);
      else
        y[l.dst] += v;
    }
  }
  for (const auto& d : dense_) {
    Matrix m = op_.dense[d.term].matrix(t);
    const std::size_t k = op_.dense[d.term].levels.size();
    for (const auto& slots : d.blocks) {
      for (std::size_t r = 0; r < k; ++r) {
        cplx acc{};
        for (std::size_t col = 0; col < k; ++col)
          if (slots[col] != npos) acc += m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) * x[slots[col]];
        if (slots[r] == npos)
          dropped += std::norm(acc);
        else
          y[slots[r]] += acc;
      }
    }
  }
  return dropped;
}

Matrix CompiledOperator::assemble(double t, double p0) const {
  const auto n = static_cast<Eigen::Index>(basis_->size());
  Matrix H = Matrix::Zero(n, n);
  for (const auto& c : compiled_)
    for (const auto& l : c.links)
      if (l.dst != npos)
        H(static_cast<Eigen::Index>(l.dst), static_cast<Eigen::Index>(l.src)) +=
            op_.terms[c.term].coeff(ladder_.momentum(p0, l.n), t);
  for (const auto& d : dense_) {
    Matrix m = op_.dense[d.term].matrix(t);
    const std::size_t k = op_.dense[d.term].levels.size();
    for (const auto& slots : d.blocks)
      for (std::size_t r = 0; r < k; ++r)
        for (std::size_t col = 0; col < k; ++col)
          if (slots[r] != npos && slots[col] != npos)
            H(static_cast<Eigen::Index>(slots[r]), static_cast<Eigen::Index>(slots[col])) +=
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col));
  }
  return H;
}

LadderBasis reachable_basis(const BlockOperator& op, std::span<const Site> seeds, std::int64_t n_min,
                            std::int64_t n_max) {
  std::set<Site> seen;
  std::deque<Site> queue;
  for (const auto& s : seeds) {
    if (s.n < n_min || s.n > n_max) throw Error(ErrorKind::grid, "seed outside the ladder window");
    if (seen.insert(s).second) queue.push_back(s);
  }
  std::map<LevelId, std::vector<std::pair<LevelId, std::int64_t>>> moves;
  for (const auto& t : op.terms) moves[t.col].push_back({t.row, t.shift});
  for (const auto& d : op.dense)
    for (LevelId a : d.levels)
      for (LevelId b : d.levels) moves[a].push_back({b, 0});
  while (!queue.empty()) {
    Site s = queue.front();
    queue.pop_front();
    auto it = moves.find(s.level);
    if (it == moves.end()) continue;
    for (auto [row, shift] : it->second) {
      Site nxt{row, s.n + shift};
      if (nxt.n < n_min || nxt.n > n_max) continue;
      if (seen.insert(nxt).second) queue.push_back(nxt);
    }
  }
  return LadderBasis({seen.begin(), seen.end()}, n_min, n_max);
}

ShiftResult plane_wave_shift(std::int64_t k_steps, const StateVector& state, double loss_cap) {
  const auto& B = state.basis();
  if (std::abs(k_steps) > B.n_max() - B.n_min())
    throw Error(ErrorKind::precondition, "shift larger than the ladder window");
  ShiftResult out{StateVector(state.basis_ptr(), state.base_momenta(), state.norm_tolerance), 0.0};
  for (std::size_t f = 0; f < state.families(); ++f) {
    for (std::size_t i = 0; i < B.size(); ++i) {
      const cplx a = state.at(f, i);
      if (a == cplx{}) continue;
      const Site& s = B.site(i);
      auto dst = B.find({s.level, s.n + k_steps});
      if (dst)
        out.state.at(f, *dst) = a;
      else
        out.truncation_loss += std::norm(a);
    }
  }
  if (out.truncation_loss > loss_cap)
    throw TruncationError("plane-wave shift left the ladder window", out.truncation_loss);
  return out;
}

StateVector apply(const BlockOperator& block, double t, const StateVector& state, const MomentumLadder& ladder,
                  double loss_cap) {
  CompiledOperator op(block, state.basis_ptr(), ladder);
  StateVector out(state.basis_ptr(), state.base_momenta(), state.norm_tolerance);
  double lost = 0.0;
  for (std::size_t f = 0; f < state.families(); ++f)
    lost += op.apply(t, state.base_momenta()[f], state.family(f), out.family(f));
  if (lost > loss_cap) throw TruncationError("operator maps amplitude outside the ladder window", lost);
  return out;
}

std::pair<cplx, cplx> conjugate_shift_check(double T, std::int64_t k_steps, double p, const ShiftCheckParams& prm) {
  MomentumLadder ladder;
  ladder.M = prm.M;
  ladder.omega_ref = prm.omega_ref;
  const std::int64_t lo = std::min<std::int64_t>(0, k_steps) - 1;
  const std::int64_t hi = std::max<std::int64_t>(0, k_steps) + 1;
  ladder.n_min = lo;
  ladder.n_max = hi;
  const LevelId g = 0;
  auto basis = std::make_shared<const LadderBasis>(LadderBasis::dense(std::span<const LevelId>(&g, 1), lo, hi));
  StateVector psi(basis, {p});
  psi.set(0, {g, 0}, 1.0);

  auto phase = [&](StateVector& s, double sign, double w) {
    for (std::size_t i = 0; i < basis->size(); ++i) {
      double q = ladder.momentum(p, basis->site(i).n);
      s.at(0, i) *= std::exp(sign * I * T * (ladder.kinetic(q) + w));
    }
  };
  phase(psi, +1.0, prm.omega1);
  auto shifted = plane_wave_shift(k_steps, psi).state;
  phase(shifted, -1.0, prm.omega2);
  cplx lhs = shifted.get(0, {g, k_steps});

  const double kappa = static_cast<double>(k_steps) / static_cast<double>(prm.M);
  const double nu = 2.0 * prm.omega_ref * kappa * p;
  const double wr = prm.omega_ref * kappa * kappa;
  cplx rhs = std::exp(-I * T * ((prm.omega2 - prm.omega1) + nu + wr));
  return {lhs, rhs};
}

}  // namespace tdae
