#include "tdae/propagator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace tdae {

const char* to_string(Method m) { return m == Method::rk45 ? "rk45" : "expm"; }

Method method_from_string(const std::string& s) {
  if (s == "rk45") return Method::rk45;
  if (s == "expm") return Method::expm;
  throw ConfigError("integrator.method", "expected 'rk45' or 'expm', got '" + s + "'");
}

std::vector<double> level_populations(const StateVector& psi, std::size_t n_levels) {
  std::vector<double> pop(n_levels, 0.0);
  for (std::size_t f = 0; f < psi.families(); ++f)
    for (std::size_t i = 0; i < psi.sites(); ++i)
      pop[static_cast<std::size_t>(psi.basis().site(i).level)] += std::norm(psi.at(f, i));
  return pop;
}

std::vector<Vector> expm_evolve(const Matrix& H, const Vector& psi0, double t0, std::span<const double> times) {
  if (H.rows() != H.cols() || H.rows() != psi0.size()) throw Error(ErrorKind::precondition, "dimension mismatch");
  std::vector<Vector> out;
  out.reserve(times.size());
  const bool herm = (H - H.adjoint()).norm() <= 1e-14 * std::max(1.0, H.norm());
  if (herm) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    const Matrix& V = es.eigenvectors();
    const Vector c = V.adjoint() * psi0;
    for (double t : times) {
      Vector ph = c;
      for (Eigen::Index k = 0; k < ph.size(); ++k) ph(k) *= std::exp(-I * es.eigenvalues()(k) * (t - t0));
      out.push_back(V * ph);
    }
    return out;
  }
  Eigen::ComplexEigenSolver<Matrix> es(H);
  Eigen::JacobiSVD<Matrix> svd(es.eigenvectors());
  const auto& sv = svd.singularValues();
  const bool defective = es.info() != Eigen::Success || !(sv(sv.size() - 1) > 1e-10 * sv(0));
  if (!defective) {
    const Matrix& V = es.eigenvectors();
    const Vector c = V.partialPivLu().solve(psi0);
    for (double t : times) {
      Vector ph = c;
      for (Eigen::Index k = 0; k < ph.size(); ++k) ph(k) *= std::exp(-I * es.eigenvalues()(k) * (t - t0));
      out.push_back(V * ph);
    }
    return out;
  }
  for (double t : times) {
    Matrix A = (-I * (t - t0)) * H;
    out.push_back(A.exp() * psi0);
  }
  return out;
}

namespace {

struct WindowOverflow {
  double leak;
};

struct FamilyResult {
  std::vector<std::vector<cplx>> samples;
  DP45Stats stats;
  double leak = 0.0;
};

FamilyResult run_family(const BlockOperator& H, const CompiledOperator& op, double p0, std::span<const cplx> y0,
                        double t0, std::span<const double> times, const IntegratorConfig& cfg) {
  FamilyResult fr;
  fr.samples.resize(times.size());
  const double offset = cfg.family_offset ? cfg.family_offset(p0) : 0.0;
  auto restore = [&](double t, std::span<const cplx> y) {
    std::vector<cplx> v(y.begin(), y.end());
    if (offset != 0.0) {
      const cplx ph = std::exp(-I * offset * (t - t0));
      for (auto& a : v) a *= ph;
    }
    return v;
  };
  if (cfg.method == Method::expm) {
    if (H.time_dependent) throw Error(ErrorKind::precondition, "expm propagation needs a time-independent generator");
    Matrix Hm = op.assemble(t0, p0);
    Vector v0(static_cast<Eigen::Index>(y0.size()));
    for (std::size_t i = 0; i < y0.size(); ++i) v0(static_cast<Eigen::Index>(i)) = y0[i];
    const auto vs = expm_evolve(Hm, v0, t0, times);
    for (std::size_t s = 0; s < times.size(); ++s) fr.samples[s].assign(vs[s].data(), vs[s].data() + vs[s].size());
    return fr;
  }
  std::vector<cplx> y(y0.begin(), y0.end()), scratch(y0.size());
  auto rhs = [&](double t, std::span<const cplx> x, std::span<cplx> dy) {
    op.apply(t, p0, x, dy);
    for (std::size_t i = 0; i < dy.size(); ++i) dy[i] = -I * (dy[i] - offset * x[i]);
  };
  DP45Options o;
  o.rtol = cfg.rtol;
  o.atol = cfg.atol;
  o.max_step = cfg.max_step;
  o.initial_step = cfg.initial_step;
  o.fixed_step = cfg.fixed_step;
  auto on_sample = [&](std::size_t i, double t, std::span<const cplx> v) { fr.samples[i] = restore(t, v); };
  auto on_step = [&](double t, double h, std::span<const cplx> v) {
    const double dropped = op.apply(t, p0, v, scratch);
    const double leak = h * h * dropped;
    fr.leak += leak;
    if (leak > cfg.truncation_cap) throw WindowOverflow{leak};
  };
  fr.stats = dormand_prince(rhs, t0, y, times, on_sample, o, on_step);
  return fr;
}

StateVector embed(const StateVector& psi, std::shared_ptr<const LadderBasis> basis) {
  StateVector out(basis, psi.base_momenta(), psi.norm_tolerance);
  for (std::size_t f = 0; f < psi.families(); ++f)
    for (std::size_t i = 0; i < psi.sites(); ++i) out.set(f, psi.basis().site(i), psi.at(f, i));
  return out;
}

}  // namespace

TrajectoryResult evolve(const BlockOperator& H, const StateVector& psi_in, const MomentumLadder& ladder, double t0,
                        std::span<const double> times, const IntegratorConfig& cfg) {
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) throw ConfigError("integrator.rtol", "tolerances must be positive");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t0) throw Error(ErrorKind::precondition, "sample time precedes t0");
    if (i > 0 && !(times[i] > times[i - 1])) throw Error(ErrorKind::precondition, "sample times must increase");
  }
  if (!psi_in.finite()) throw Error(ErrorKind::precondition, "initial state has non-finite entries");

  StateVector psi0 = psi_in;
  TrajectoryResult tr;
  for (int attempt = 0;; ++attempt) {
    auto basis = psi0.basis_ptr();
    const CompiledOperator op(H, basis, ladder);
    const std::size_t F = psi0.families();
    std::vector<FamilyResult> res(F);
    std::vector<std::exception_ptr> errs(F);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> overflow{false};
    auto worker = [&]() {
      for (std::size_t f = next++; f < F; f = next++) {
        try {
          res[f] = run_family(H, op, psi0.base_momenta()[f], psi0.family(f), t0, times, cfg);
        } catch (const WindowOverflow&) {
          overflow = true;
        } catch (...) {
          errs[f] = std::current_exception();
        }
      }
    };
    const unsigned nt = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(F)));
    if (nt == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (unsigned i = 0; i < nt; ++i) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
    if (overflow) {
      if (attempt >= cfg.max_window_doublings)
        throw TruncationError("ladder truncation loss above cap after window doublings", cfg.truncation_cap);
      std::vector<Site> seeds(basis->sites());
      auto wider = std::make_shared<const LadderBasis>(
          reachable_basis(H, seeds, 2 * basis->n_min(), 2 * basis->n_max()));
      psi0 = embed(psi0, wider);
      ++tr.window_doublings;
      continue;
    }

    std::size_t n_levels = 0;
    for (const auto& s : basis->sites()) n_levels = std::max(n_levels, static_cast<std::size_t>(s.level) + 1);
    tr.times.assign(times.begin(), times.end());
    for (std::size_t f = 0; f < F; ++f) tr.initial_family_norms.push_back(psi0.family_norm(f));
    for (std::size_t s = 0; s < times.size(); ++s) {
      StateVector st(basis, psi0.base_momenta(), psi0.norm_tolerance);
      for (std::size_t f = 0; f < F; ++f) std::copy(res[f].samples[s].begin(), res[f].samples[s].end(), st.family(f).begin());
      tr.populations.push_back(level_populations(st, n_levels));
      tr.norms.push_back(st.norm());
      tr.pulse_area_progress.push_back(cfg.area ? cfg.area(times[s]) : 0.0);
      if (cfg.keep_states) tr.states.push_back(std::move(st));
    }
    for (const auto& r : res) {
      tr.truncation_loss += r.leak;
      tr.steps += r.stats.accepted;
      tr.rejected += r.stats.rejected;
      tr.evaluations += r.stats.evaluations;
    }
    return tr;
  }
}

namespace {

void check_alignment(const TrajectoryResult& a, const TrajectoryResult& b, std::span<const LevelId> levels) {
  if (a.times.size() != b.times.size()) throw AlignmentError("trajectories have different sample counts");
  for (std::size_t i = 0; i < a.times.size(); ++i)
    if (std::abs(a.times[i] - b.times[i]) > 1e-12 * std::max(1.0, std::abs(a.times[i])))
      throw AlignmentError("sample times differ at index " + std::to_string(i));
  if (a.states.size() != a.times.size() || b.states.size() != b.times.size())
    throw AlignmentError("trajectories do not keep their states");
  if (a.states.empty()) return;
  const auto& sa = a.states.front();
  const auto& sb = b.states.front();
  if (sa.base_momenta() != sb.base_momenta()) throw AlignmentError("momentum families differ");
  for (LevelId l : levels) {
    auto has = [l](const StateVector& s) {
      for (const auto& site : s.basis().sites())
        if (site.level == l) return true;
      return false;
    };
    if (!has(sa) || !has(sb)) throw AlignmentError("level " + std::to_string(l) + " missing from a trajectory");
  }
}

template <class Acc>
void pair_sites(const StateVector& a, const StateVector& b, std::span<const LevelId> levels, Acc&& acc) {
  auto want = [&](LevelId l) { return std::find(levels.begin(), levels.end(), l) != levels.end(); };
  for (std::size_t f = 0; f < a.families(); ++f) {
    for (std::size_t i = 0; i < a.sites(); ++i) {
      const Site& s = a.basis().site(i);
      if (!want(s.level)) continue;
      acc(a.at(f, i), b.get(f, s));
    }
    for (std::size_t i = 0; i < b.sites(); ++i) {
      const Site& s = b.basis().site(i);
      if (!want(s.level) || a.basis().find(s)) continue;
      acc(cplx{}, b.at(f, i));
    }
  }
}

}  // namespace

std::vector<double> relative_error(const TrajectoryResult& a, const TrajectoryResult& b,
                                   std::span<const LevelId> levels) {
  check_alignment(a, b, levels);
  std::vector<double> d;
  for (std::size_t s = 0; s < a.states.size(); ++s) {
    double acc = 0.0;
    pair_sites(a.states[s], b.states[s], levels, [&](cplx x, cplx y) { acc += std::norm(x - y); });
    d.push_back(std::sqrt(acc));
  }
  return d;
}

std::vector<double> relative_error_phase_aligned(const TrajectoryResult& a, const TrajectoryResult& b,
                                                 std::span<const LevelId> levels) {
  check_alignment(a, b, levels);
  std::vector<double> d;
  for (std::size_t s = 0; s < a.states.size(); ++s) {
    double na = 0.0, nb = 0.0;
    cplx ov{};
    pair_sites(a.states[s], b.states[s], levels, [&](cplx x, cplx y) {
      na += std::norm(x);
      nb += std::norm(y);
      ov += std::conj(x) * y;
    });
    d.push_back(std::sqrt(std::max(0.0, na + nb - 2.0 * std::abs(ov))));
  }
  return d;
}

std::vector<DensityRow> momentum_density(const TrajectoryResult& traj, const MomentumLadder& ladder) {
  std::vector<DensityRow> rows;
  for (std::size_t s = 0; s < traj.states.size(); ++s) {
    const StateVector& st = traj.states[s];
    for (std::size_t f = 0; f < st.families(); ++f) {
      const double n0 = f < traj.initial_family_norms.size() ? traj.initial_family_norms[f] : 1.0;
      const double w = n0 > 0.0 ? 1.0 / (n0 * n0) : 0.0;
      for (std::size_t i = 0; i < st.sites(); ++i) {
        const Site& site = st.basis().site(i);
        rows.push_back({s, f, site.level, site.n, ladder.momentum(st.base_momenta()[f], site.n),
                        std::norm(st.at(f, i)) * w});
      }
    }
  }
  return rows;
}

}  // namespace tdae
