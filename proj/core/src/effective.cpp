#include "tdae/effective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "tdae/error.hpp"
#include "tdae/models.hpp"

namespace tdae {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::warn: return "warn";
    case Verdict::fail: return "fail";
  }
  return "?";
}

const char* to_string(SMode m) { return m == SMode::closed ? "closed" : "quadrature"; }

SMode s_mode_from_string(const std::string& s) {
  if (s == "closed") return SMode::closed;
  if (s == "quadrature") return SMode::quadrature;
  throw ConfigError("s_mode", "expected 'closed' or 'quadrature', got '" + s + "'");
}

namespace {

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

struct SiteIndex {
  std::vector<Site> rel, anc;
  std::map<Site, Eigen::Index> rel_pos, anc_pos;
};

SiteIndex index_sites(const SystemSpec& spec, const LadderBasis& basis) {
  SiteIndex ix;
  for (const auto& s : basis.sites()) {
    if (spec.space.is_relevant(s.level)) {
      ix.rel_pos[s] = static_cast<Eigen::Index>(ix.rel.size());
      ix.rel.push_back(s);
    } else {
      ix.anc_pos[s] = static_cast<Eigen::Index>(ix.anc.size());
      ix.anc.push_back(s);
    }
  }
  return ix;
}

// Coupling block on the site basis. mode 0: complex Omega(s); 1: |envelope|; 2: |d envelope/ds|.
Matrix coupling_block(const SystemSpec& spec, const SiteIndex& ix, double s, int mode) {
  Matrix W = Matrix::Zero(static_cast<Eigen::Index>(ix.anc.size()), static_cast<Eigen::Index>(ix.rel.size()));
  for (const auto& c : spec.couplings) {
    const double env = mode == 2 ? derivative(c.envelope, s) : evaluate(c.envelope, s);
    if (env == 0.0) continue;
    cplx val = mode == 0 ? env * c.factor * std::exp(-I * c.omega * s) : cplx{std::abs(env * c.factor), 0.0};
    for (const auto& [site, col] : ix.rel_pos) {
      if (site.level != c.level) continue;
      Site a{c.ancilla, site.n + (spec.com ? c.steps : 0)};
      auto it = ix.anc_pos.find(a);
      if (it == ix.anc_pos.end()) continue;
      W(it->second, col) += val;
    }
  }
  return W;
}

struct Spectrum {
  Eigen::VectorXd delta, xi;
  Matrix Vd, Vx;
};

Spectrum family_spectrum(const Matrix& H, const SiteIndex& ix, const std::vector<std::size_t>& rel_slots,
                         const std::vector<std::size_t>& anc_slots) {
  auto sub = [&](const std::vector<std::size_t>& sl) {
    Matrix m(static_cast<Eigen::Index>(sl.size()), static_cast<Eigen::Index>(sl.size()));
    for (std::size_t i = 0; i < sl.size(); ++i)
      for (std::size_t j = 0; j < sl.size(); ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            H(static_cast<Eigen::Index>(sl[i]), static_cast<Eigen::Index>(sl[j]));
    return m;
  };
  (void)ix;
  Spectrum sp;
  Eigen::SelfAdjointEigenSolver<Matrix> ed(sub(rel_slots)), ex(sub(anc_slots));
  sp.delta = ed.eigenvalues();
  sp.xi = ex.eigenvalues();
  sp.Vd = ed.eigenvectors();
  sp.Vx = ex.eigenvectors();
  return sp;
}

}  // namespace

ValidityReport validity_report(const SystemSpec& spec, double t0, double t, std::vector<Site> seeds) {
  ValidityReport r;
  if (seeds.empty())
    for (LevelId l : spec.space.relevant()) seeds.push_back({l, 0});
  const auto basis = full_basis(spec, seeds);
  const SiteIndex ix = index_sites(spec, *basis);
  if (ix.anc.empty()) {
    r.notes.push_back("no ancilla site reachable from the seeds");
    r.verdict = Verdict::fail;
    return r;
  }
  std::vector<std::size_t> rel_slots, anc_slots;
  for (std::size_t i = 0; i < basis->size(); ++i)
    (spec.space.is_relevant(basis->site(i).level) ? rel_slots : anc_slots).push_back(i);

  BlockOperator diag_only;
  for (std::size_t l = 0; l < spec.space.size(); ++l) {
    const double d = spec.diag(static_cast<LevelId>(l));
    const MomentumLadder lad = spec.ladder;
    const bool com = spec.com;
    diag_only.terms.push_back({static_cast<LevelId>(l), static_cast<LevelId>(l), 0, [d, lad, com](double p, double) {
                                 return cplx{d + (com ? lad.kinetic(p) : 0.0), 0.0};
                               }});
  }
  const CompiledOperator op(diag_only, basis, spec.ladder);
  const std::vector<double> fams = spec.com ? spec.ladder.base_momenta : std::vector<double>{0.0};

  // manifold spectra per family
  std::vector<Spectrum> spectra;
  double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
  for (double p0 : fams) {
    spectra.push_back(family_spectrum(op.assemble(t0, p0), ix, rel_slots, anc_slots));
    for (Eigen::Index k = 0; k < spectra.back().xi.size(); ++k)
      for (Eigen::Index m = 0; m < spectra.back().delta.size(); ++m) {
        const double d = spectra.back().xi(k) - spectra.back().delta(m);
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
      }
  }
  double sign = 1.0;
  if (dmin > 0.0) {
    r.gamma_star = dmin;
    r.epsilon_max = dmax - dmin;
  } else if (dmax < 0.0) {
    sign = -1.0;
    r.gamma_star = -dmax;
    r.epsilon_max = dmax - dmin;
    r.notes.push_back("ancilla manifold lies below the relevant manifold; gap taken in magnitude");
  } else {
    r.gamma_star = dmin;
    r.epsilon_max = dmax - dmin;
    r.notes.push_back("manifold spectra interleave: no gap");
  }

  std::ostringstream sup;
  sup << "families=" << fams.size() << " sites=" << basis->size() << " relevant_sites=" << ix.rel.size()
      << " ancilla_sites=" << ix.anc.size();
  if (spec.com) sup << " window=[" << basis->n_min() << "," << basis->n_max() << "] M=" << spec.ladder.M;
  r.support = sup.str();

  // time samples, including envelope peaks and edges
  std::set<double> ts;
  const int N = 400;
  for (int i = 0; i <= N; ++i) ts.insert(t0 + (t - t0) * i / N);
  for (const auto& c : spec.couplings) {
    for (double s : {c.envelope.start(), c.envelope.start() + 0.5 * c.envelope.T, c.envelope.end()})
      if (std::isfinite(s) && s >= t0 && s <= t) ts.insert(s);
  }

  bool discontinuous = false;
  for (const auto& c : spec.couplings)
    if (c.envelope.kind == PulseKind::box && std::isfinite(c.envelope.end()) && c.envelope.end() < t) discontinuous = true;
  if (discontinuous) r.notes.push_back("box envelope switches off inside the window; edge derivative not counted");

  for (double s : ts) {
    r.coupling_norm = std::max(r.coupling_norm, spectral_norm(coupling_block(spec, ix, s, 1)));
    r.derivative_norm = std::max(r.derivative_norm, spectral_norm(coupling_block(spec, ix, s, 2)));
  }
  if (r.gamma_star > 0.0) {
    r.coupling_ratio = r.coupling_norm / r.gamma_star;
    r.smoothness = pi * r.derivative_norm * (t - t0) / r.gamma_star;

    const double tau = pi / r.gamma_star;
    double first = 0.0, second = 0.0;
    for (std::size_t f = 0; f < fams.size(); ++f) {
      const Spectrum& sp = spectra[f];
      Matrix E(sp.xi.size(), sp.delta.size());
      for (Eigen::Index k = 0; k < E.rows(); ++k)
        for (Eigen::Index m = 0; m < E.cols(); ++m) {
          const double eps = sign * (sp.xi(k) - sp.delta(m)) - r.gamma_star;
          E(k, m) = std::exp(-I * pi * eps / r.gamma_star);
        }
      for (double s : ts) {
        const Matrix W = sp.Vx.adjoint() * coupling_block(spec, ix, s, 0) * sp.Vd;
        first = std::max(first, spectral_norm(W));
        if (s - tau < t0) continue;
        const Matrix Wp = sp.Vx.adjoint() * coupling_block(spec, ix, s - tau, 0) * sp.Vd;
        second = std::max(second, spectral_norm(W - Wp.cwiseProduct(E)));
      }
    }
    r.bound_value = tau * first + 0.5 * (t - t0) * second;
  } else {
    r.coupling_ratio = std::numeric_limits<double>::infinity();
    r.smoothness = std::numeric_limits<double>::infinity();
    r.bound_value = std::numeric_limits<double>::infinity();
  }

  if (!(r.gamma_star > 0.0) || r.coupling_ratio >= 1.0 || r.smoothness >= 1.0)
    r.verdict = Verdict::fail;
  else if (r.coupling_ratio > validity_warn_threshold || r.smoothness > validity_warn_threshold)
    r.verdict = Verdict::warn;
  else
    r.verdict = Verdict::pass;
  if (!std::isfinite(r.coupling_ratio)) {
    r.coupling_ratio = -1.0;
    r.smoothness = -1.0;
    r.bound_value = -1.0;
    r.notes.push_back("ratios undefined without a positive gap; reported as -1");
  }
  return r;
}

namespace {

bool constant_coupling(const SystemSpec& spec) {
  for (const auto& c : spec.couplings) {
    if (c.envelope.kind != PulseKind::box || std::isfinite(c.envelope.T)) return false;
    if (c.envelope.t0 != spec.t0 || c.omega != 0.0) return false;
  }
  return true;
}

struct FiniteParts {
  Matrix delta, xi;
  MatrixFn omega;
};

FiniteParts finite_parts(const SystemSpec& spec) {
  auto sp = std::make_shared<const SystemSpec>(spec);
  const Blocks b = finite_blocks(spec, spec.t0);
  std::vector<Site> sites;
  for (std::size_t l = 0; l < spec.space.size(); ++l) sites.push_back({static_cast<LevelId>(l), 0});
  auto ix = std::make_shared<const SiteIndex>(index_sites(spec, LadderBasis(sites, 0, 0)));
  FiniteParts fp;
  fp.delta = b.delta;
  fp.xi = b.xi;
  fp.omega = [sp, ix](double s) { return coupling_block(*sp, *ix, s, 0); };
  return fp;
}

}  // namespace

Matrix effective_matrix(const SystemSpec& spec, int order, double t, bool constant_omega, const ProjectorOptions& opt) {
  if (spec.com) throw Error(ErrorKind::precondition, "effective_matrix needs a system without COM motion");
  const FiniteParts fp = finite_parts(spec);
  const auto P = projector_series(order, fp.delta, fp.xi, fp.omega, spec.t0, constant_omega, opt);
  Matrix sum = Matrix::Zero(fp.xi.rows(), fp.delta.rows());
  for (const auto& Pl : P) sum += Pl(t);
  return fp.delta + fp.omega(t).adjoint() * sum;
}

EffectiveHamiltonian effective_hamiltonian(const SystemSpec& spec, const EffectiveOptions& opt) {
  if (opt.order < 1) throw Error(ErrorKind::precondition, "effective Hamiltonian order must be >= 1");
  EffectiveHamiltonian H;
  H.order = opt.order;
  H.levels = spec.space.relevant();
  H.validity = validity_report(spec, spec.t0, spec.t_end);
  if (!(H.validity.gamma_star > 0.0))
    throw Error(ErrorKind::validity, "no spectral gap between relevant and ancilla manifolds (gamma_star <= 0)");
  H.metadata["system"] = to_string(spec.kind);
  H.metadata["order"] = std::to_string(opt.order);
  H.metadata["validity"] = to_string(H.validity.verdict);
  if (H.validity.verdict != Verdict::pass) H.metadata["validity_flag"] = "expansion parameter not small";

  if (!spec.com) {
    const bool constant = constant_coupling(spec) && opt.s_mode == SMode::closed;
    const FiniteParts fp = finite_parts(spec);
    auto P = std::make_shared<const std::vector<MatrixFn>>(
        projector_series(opt.order, fp.delta, fp.xi, fp.omega, spec.t0, constant, opt.projector));
    const Matrix delta = fp.delta;
    const MatrixFn omega = fp.omega;
    DenseTerm d;
    d.levels = H.levels;
    d.matrix = [P, delta, omega](double t) {
      Matrix sum = Matrix::Zero((*P)[0](t).rows(), delta.rows());
      for (const auto& Pl : *P) sum += Pl(t);
      return Matrix(delta + omega(t).adjoint() * sum);
    };
    H.block.dense.push_back(std::move(d));
    H.block.time_dependent = !constant;
    H.metadata["route"] = "projector_series";
    H.metadata["s_mode"] = constant ? "closed" : "quadrature";
    H.metadata["rwa"] = "false";
    if (opt.rwa) H.metadata["rwa_note"] = "rwa flag ignored for finite systems";
    return H;
  }

  if (opt.order != 1) throw Error(ErrorKind::precondition, "COM systems support order 1 only");
  auto sp = std::make_shared<const SystemSpec>(spec);
  const MomentumLadder lad = spec.ladder;
  for (LevelId l : H.levels) {
    const double d = spec.diag(l);
    H.block.terms.push_back({l, l, 0, [d, lad](double p, double) { return cplx{d + lad.kinetic(p), 0.0}; }});
  }
  const double t0 = spec.t0;
  const SMode mode = opt.s_mode;
  const bool rwa = opt.rwa;
  const double tol = opt.quad_tol;
  std::vector<std::string> dropped;
  for (LevelId b : spec.space.irrelevant()) {
    for (std::size_t u = 0; u < spec.couplings.size(); ++u) {
      const Coupling& cu = spec.couplings[u];
      if (cu.ancilla != b) continue;
      for (std::size_t v = 0; v < spec.couplings.size(); ++v) {
        const Coupling& cv = spec.couplings[v];
        if (cv.ancilla != b) continue;
        EffectiveTerm et{cu.level, cv.level, cv.steps - cu.steps, b, u, v, cv.omega - cu.omega};
        H.terms.push_back(et);
        const cplx f = std::conj(cu.factor) * cv.factor;
        const double w = et.phase_omega;
        const PulseShape en = cu.envelope, ej = cv.envelope;
        std::function<cplx(double, double)> coeff;
        if (mode == SMode::quadrature)
          coeff = [sp, v, f, w, en, ej, t0, tol](double p, double t) {
            return f * std::exp(-I * w * t) * s_quadrature(en, ej, sp->coupling_detuning(v, p), t0, t, tol);
          };
        else if (rwa)
          coeff = [sp, v, f, w, en, ej](double p, double t) {
            return f * std::exp(-I * w * t) * s_rwa(en, ej, sp->coupling_detuning(v, p), t);
          };
        else
          coeff = [sp, v, f, w, en, ej, t0](double p, double t) {
            return f * std::exp(-I * w * t) * s_closed(en, ej, sp->coupling_detuning(v, p), t0, t);
          };
        H.block.terms.push_back({et.row, et.col, et.shift, std::move(coeff)});
        for (double p0 : spec.ladder.base_momenta)
          H.rwa_ratio_max = std::max(H.rwa_ratio_max, rwa_ratio(ej, spec.coupling_detuning(v, p0)));
        if (rwa && mode == SMode::closed)
          dropped.push_back("S[" + cu.laser + "," + cv.laser + "]");
      }
    }
  }
  H.block.time_dependent = true;
  H.metadata["route"] = "first_order_s_terms";
  H.metadata["s_mode"] = to_string(mode);
  H.metadata["rwa"] = rwa && mode == SMode::closed ? "true" : "false";
  H.metadata["detuning_convention"] =
      spec.convention == DetuningConvention::derived ? "derived" : "as_published";
  if (!dropped.empty()) {
    std::string s;
    for (const auto& d : dropped) s += (s.empty() ? "" : ";") + d;
    H.metadata["rwa_dropped"] = s;
  }
  return H;
}

}  // namespace tdae
