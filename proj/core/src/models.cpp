#include "tdae/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "tdae/error.hpp"

namespace tdae {

namespace {

struct Layout {
  std::vector<std::string> relevant;
  std::vector<std::string> ancillas;
  std::map<std::string, double> theta;  // frame frequency per level label
};

double envelope_end(const std::vector<LaserSpec>& lasers, double horizon) {
  double e = -std::numeric_limits<double>::infinity();
  for (const auto& l : lasers) e = std::max(e, l.envelope.end());
  if (!std::isfinite(e)) e = horizon;
  return e;
}

double envelope_start(const std::vector<LaserSpec>& lasers) {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& l : lasers) s = std::min(s, l.envelope.start());
  return s;
}

void require_level(const AtomConstants& c, const std::string& name, const std::string& field) {
  if (!c.has_level(name)) throw ConfigError(field, "level '" + name + "' not in atom " + c.label);
}

SystemSpec build_com(SystemKind kind, const AtomConstants& constants, const std::vector<LaserSpec>& lasers,
                     const Layout& lay, const ComOptions& com) {
  if (!(constants.mass_kg > 0.0)) throw ConfigError("mass_kg", "must be positive");
  for (std::size_t i = 0; i < lasers.size(); ++i) {
    const auto f = "lasers[" + std::to_string(i) + "]";
    require_level(constants, lasers[i].lower, f + ".lower");
    require_level(constants, lasers[i].upper, f + ".upper");
    if (!(std::abs(lasers[i].k) > 0.0)) throw ConfigError(f + ".k", "diffraction lasers need |k| > 0");
    if (!std::isfinite(lasers[i].omega)) throw ConfigError(f + ".omega", "not finite");
  }
  SystemSpec s;
  s.kind = kind;
  s.name = to_string(kind);
  s.constants = constants;
  s.lasers = lasers;
  s.com = true;

  std::vector<Level> levels;
  for (const auto& l : lay.relevant) levels.push_back({l, constants.level(l), true});
  for (const auto& l : lay.ancillas) levels.push_back({l, constants.level(l), false});
  s.space = InternalSpace(levels);

  const LaserSpec& ref = lasers.at(1);
  const double e_ref =
      com.energy_reference.value_or(constants.level(ref.lower) + lay.theta.at(ref.lower));
  s.frame.resize(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) s.frame[i] = lay.theta.at(levels[i].label) - e_ref;

  double k_ref = com.k_ref;
  if (!(k_ref > 0.0)) k_ref = std::abs(lasers[1].k - lasers[0].k);
  if (!(k_ref > 0.0)) throw Error(ErrorKind::grid, "reference wavevector vanishes (k2 == k1)");
  std::vector<double> kappas;
  for (const auto& l : lasers) kappas.push_back(l.k / k_ref);
  const Commensuration cm = commensurate(kappas, com.commensuration_tol);
  s.commensuration_residual = cm.max_residual;

  std::int64_t max_steps = 0;
  for (std::size_t i = 0; i < lasers.size(); ++i) {
    const LaserSpec& l = lasers[i];
    Coupling c;
    c.ancilla = s.space.index(l.upper);
    c.level = s.space.index(l.lower);
    c.envelope = l.envelope;
    c.factor = l.factor;
    c.steps = cm.steps[i];
    c.kappa = static_cast<double>(cm.steps[i]) / static_cast<double>(cm.M);
    c.omega = l.omega + lay.theta.at(l.upper) - lay.theta.at(l.lower);
    c.laser = l.name.empty() ? "laser" + std::to_string(i + 1) : l.name;
    s.couplings.push_back(c);
    max_steps = std::max(max_steps, std::abs(cm.steps[i]));
  }

  MomentumLadder& lad = s.ladder;
  lad.k_ref = k_ref;
  lad.M = cm.M;
  lad.base_momenta = com.base_momenta;
  lad.generators = cm.steps;
  lad.n_min = -com.window_kicks * max_steps;
  lad.n_max = com.window_kicks * max_steps;
  lad.omega_ref = phys::hbar * k_ref * k_ref / (2.0 * constants.mass_kg);
  lad.validate();

  s.t0 = envelope_start(lasers);
  s.t_end = envelope_end(lasers, com.horizon);
  return s;
}

}  // namespace

SystemSpec five_level_system(const FiveLevelParams& prm) {
  SystemSpec s;
  s.kind = SystemKind::five_level;
  s.name = "five_level";
  s.constants.label = "five_level";
  s.constants.mass_kg = 1.0;
  s.constants.levels = {{"g", prm.omega_g}, {"m", prm.omega_m}, {"e", prm.omega_e},
                        {"a1", prm.omega_a1}, {"a2", prm.omega_a2}};
  s.constants.provenance["levels"] = "five-level benchmark system";
  std::vector<Level> levels;
  for (const auto& [l, w] : s.constants.levels) levels.push_back({l, w, l[0] != 'a'});
  s.space = InternalSpace(levels);
  s.frame.assign(levels.size(), 0.0);
  const char* rel[] = {"g", "m", "e"};
  const char* anc[] = {"a1", "a2"};
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 3; ++l) {
      Coupling c;
      c.ancilla = s.space.index(anc[k]);
      c.level = s.space.index(rel[l]);
      c.envelope = PulseShape::box(prm.coupling(k, l), 0.0);
      c.laser = "Omega" + std::to_string(3 * k + l + 1);
      s.couplings.push_back(c);
    }
  s.t0 = 0.0;
  s.t_end = prm.horizon;
  return s;
}

SystemSpec raman_system(const AtomConstants& constants, const LaserSpec& laser1, const LaserSpec& laser2,
                        const ComOptions& com) {
  if (laser1.lower == laser2.lower) throw ConfigError("lasers[1].lower", "Raman lasers must address distinct levels");
  if (laser1.upper != laser2.upper) throw ConfigError("lasers[1].upper", "Raman lasers must share the ancilla");
  Layout lay;
  lay.relevant = {laser1.lower, laser2.lower};
  lay.ancillas = {laser1.upper};
  lay.theta = {{laser1.lower, laser1.omega}, {laser2.lower, laser2.omega}, {laser1.upper, 0.0}};
  return build_com(SystemKind::raman, constants, {laser1, laser2}, lay, com);
}

SystemSpec double_raman_system(const AtomConstants& constants, const std::vector<LaserSpec>& lasers,
                               const ComOptions& com, DetuningConvention convention) {
  if (lasers.size() != 4) throw ConfigError("lasers", "double Raman needs four lasers");
  const auto& L = lasers;
  if (L[0].upper != L[1].upper || L[2].upper != L[3].upper || L[0].upper == L[2].upper)
    throw ConfigError("lasers", "lasers 1,2 must share one ancilla and lasers 3,4 the other");
  if (L[0].lower != L[2].lower || L[1].lower != L[3].lower || L[0].lower == L[1].lower)
    throw ConfigError("lasers", "lasers 1,3 must address one level and lasers 2,4 the other");
  if (L[0].omega != L[2].omega || L[1].omega != L[3].omega)
    throw ConfigError("lasers", "retro-reflected pairs must share the frequency");
  Layout lay;
  lay.relevant = {L[0].lower, L[1].lower};
  lay.ancillas = {L[0].upper, L[2].upper};
  lay.theta = {{L[0].lower, L[0].omega}, {L[1].lower, L[1].omega}, {L[0].upper, 0.0}, {L[2].upper, 0.0}};
  SystemSpec s = build_com(SystemKind::double_raman, constants, lasers, lay, com);
  s.convention = convention;
  if (convention == DetuningConvention::as_published) {
    // g via a1 and e via a2 carry the level/laser labels listed for gamma_12 and gamma_21
    const double wa1 = constants.level(L[0].upper), wa2 = constants.level(L[2].upper);
    const double we = constants.level(L[0].lower), wg = constants.level(L[1].lower);
    const double w1 = L[0].omega, w2 = L[1].omega;
    const double k1 = s.couplings[0].kappa, k2 = s.couplings[1].kappa;
    const double wref = s.ladder.omega_ref;
    s.detuning_override[1] = [=](double p) { return 2 * wref * k2 * p + wa1 - we - w1 + wref * k2 * k2; };
    s.detuning_override[2] = [=](double p) { return -2 * wref * k1 * p + wa2 - wg - w2 + wref * k1 * k1; };
  }
  return s;
}

SystemSpec bragg_system(const AtomConstants& constants, const LaserSpec& laser1, const LaserSpec& laser2,
                        const ComOptions& com) {
  if (laser1.lower != laser2.lower || laser1.upper != laser2.upper)
    throw ConfigError("lasers", "Bragg lasers must couple the same pair of levels");
  Layout lay;
  lay.relevant = {laser1.lower};
  lay.ancillas = {laser1.upper};
  lay.theta = {{laser1.lower, 0.0}, {laser1.upper, -laser1.omega}};
  return build_com(SystemKind::bragg, constants, {laser1, laser2}, lay, com);
}

SystemSpec double_bragg_system(const AtomConstants& constants, const std::vector<LaserSpec>& lasers,
                               const ComOptions& com) {
  if (lasers.size() != 4) throw ConfigError("lasers", "double Bragg needs four lasers");
  const auto& L = lasers;
  for (const auto& l : L)
    if (l.lower != L[0].lower) throw ConfigError("lasers", "double Bragg lasers must share the ground level");
  if (L[0].upper != L[1].upper || L[2].upper != L[3].upper || L[0].upper == L[2].upper)
    throw ConfigError("lasers", "lasers 1,2 must share one ancilla and lasers 3,4 the other");
  Layout lay;
  lay.relevant = {L[0].lower};
  lay.ancillas = {L[0].upper, L[2].upper};
  lay.theta = {{L[0].lower, 0.0}, {L[0].upper, -L[0].omega}, {L[2].upper, -L[0].omega}};
  return build_com(SystemKind::double_bragg, constants, lasers, lay, com);
}

SystemSpec with_frame(const SystemSpec& spec, const std::vector<double>& frame) {
  if (frame.size() != spec.space.size()) throw Error(ErrorKind::precondition, "frame size mismatch");
  SystemSpec s = spec;
  for (auto& c : s.couplings) {
    const auto a = static_cast<std::size_t>(c.ancilla), j = static_cast<std::size_t>(c.level);
    c.omega += (frame[a] - spec.frame[a]) - (frame[j] - spec.frame[j]);
  }
  s.frame = frame;
  return s;
}

BlockOperator full_hamiltonian(const SystemSpec& spec) {
  BlockOperator op;
  const bool com = spec.com;
  const MomentumLadder lad = spec.ladder;
  for (std::size_t l = 0; l < spec.space.size(); ++l) {
    const double d = spec.diag(static_cast<LevelId>(l));
    LadderTerm t{static_cast<LevelId>(l), static_cast<LevelId>(l), 0, nullptr};
    if (com)
      t.coeff = [d, lad](double p, double) { return cplx{d + lad.kinetic(p), 0.0}; };
    else
      t.coeff = [d](double, double) { return cplx{d, 0.0}; };
    op.terms.push_back(std::move(t));
  }
  for (const auto& c : spec.couplings) {
    const PulseShape env = c.envelope;
    const cplx f = c.factor;
    const double w = c.omega;
    op.terms.push_back({c.ancilla, c.level, com ? c.steps : 0,
                        [env, f, w](double, double t) { return evaluate(env, t) * f * std::exp(-I * w * t); }});
    op.terms.push_back({c.level, c.ancilla, com ? -c.steps : 0, [env, f, w](double, double t) {
                          return evaluate(env, t) * std::conj(f) * std::exp(I * w * t);
                        }});
  }
  op.time_dependent = false;
  for (const auto& c : spec.couplings)
    if (c.envelope.kind != PulseKind::box || std::isfinite(c.envelope.T) || c.omega != 0.0) op.time_dependent = true;
  return op;
}

std::shared_ptr<const LadderBasis> full_basis(const SystemSpec& spec, const std::vector<Site>& seeds) {
  const BlockOperator op = full_hamiltonian(spec);
  if (!spec.com) {
    std::vector<Site> sites;
    for (std::size_t l = 0; l < spec.space.size(); ++l) sites.push_back({static_cast<LevelId>(l), 0});
    return std::make_shared<const LadderBasis>(std::move(sites), 0, 0);
  }
  return std::make_shared<const LadderBasis>(reachable_basis(op, seeds, spec.ladder.n_min, spec.ladder.n_max));
}

Blocks blocks_at(const SystemSpec& spec, const LadderBasis& basis, double p0, double t) {
  auto bp = std::make_shared<const LadderBasis>(basis);
  const CompiledOperator op(full_hamiltonian(spec), bp, spec.ladder);
  const Matrix H = op.assemble(t, p0);
  Blocks b;
  std::vector<std::size_t> ri, ai;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (spec.space.is_relevant(basis.site(i).level)) {
      ri.push_back(i);
      b.relevant_sites.push_back(basis.site(i));
    } else {
      ai.push_back(i);
      b.ancilla_sites.push_back(basis.site(i));
    }
  }
  auto sub = [&](const std::vector<std::size_t>& r, const std::vector<std::size_t>& c) {
    Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t j = 0; j < c.size(); ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            H(static_cast<Eigen::Index>(r[i]), static_cast<Eigen::Index>(c[j]));
    return m;
  };
  b.delta = sub(ri, ri);
  b.xi = sub(ai, ai);
  b.omega = sub(ai, ri);
  return b;
}

Blocks finite_blocks(const SystemSpec& spec, double t) {
  if (spec.com) throw Error(ErrorKind::precondition, "finite_blocks needs a system without COM motion");
  return blocks_at(spec, *full_basis(spec, {}), 0.0, t);
}

TwoPhotonInfo two_photon(const SystemSpec& spec, std::optional<double> p) {
  if (spec.couplings.size() < 2 || !spec.com)
    throw Error(ErrorKind::precondition, "two_photon needs a COM system with at least two couplings");
  const Coupling& u = spec.couplings[0];
  const Coupling& v = spec.couplings[1];
  TwoPhotonInfo r;
  r.steps_eff = v.steps - u.steps;
  r.kappa_eff = static_cast<double>(r.steps_eff) / static_cast<double>(spec.ladder.M);
  const double w = spec.ladder.omega_ref;
  r.delta0 = spec.diag(u.level) - spec.diag(v.level) - (v.omega - u.omega);
  r.doppler_per_p = 2.0 * w * r.kappa_eff;
  r.recoil_eff = w * r.kappa_eff * r.kappa_eff;
  r.p_resonant = r.doppler_per_p != 0.0 ? -(r.delta0 + r.recoil_eff) / r.doppler_per_p : 0.0;
  const double pe = p.value_or(r.p_resonant);
  r.gamma1 = spec.coupling_detuning(0, pe);
  r.gamma2 = spec.coupling_detuning(1, pe);
  r.gamma0 = 0.5 * (r.gamma1 + r.gamma2);
  return r;
}

}  // namespace tdae
