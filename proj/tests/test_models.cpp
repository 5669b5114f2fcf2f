#include <gtest/gtest.h>

#include "tdae/effective.hpp"
#include "tdae/error.hpp"
#include "tdae/models.hpp"

using namespace tdae;

namespace {

// hbar k^2 / 2m = 1 rad/s at k = 1 rad/m
AtomConstants toy_atom() {
  return parse_atom_preset(R"({"label": "toy", "mass_kg": 5.272859085e-35,
                               "levels": {"g": 0.0, "e": 50.0, "a": 1000.0, "a1": 1000.0, "a2": 1010.0}})");
}

LaserSpec laser(const std::string& lo, const std::string& up, double w, double k, PulseShape env) {
  LaserSpec l;
  l.lower = lo;
  l.upper = up;
  l.omega = w;
  l.k = k;
  l.envelope = env;
  return l;
}

SystemSpec toy_raman(PulseShape env = PulseShape::box(20.0)) {
  ComOptions c;
  c.k_ref = 1.0;
  c.window_kicks = 4;
  c.horizon = 5.0;
  return raman_system(toy_atom(), laser("e", "a", 550.0, 1.0, env), laser("g", "a", 604.0, -1.0, env), c);
}

}  // namespace

TEST(Preset, ParsesAndValidates) {
  const AtomConstants a = toy_atom();
  EXPECT_EQ(a.label, "toy");
  EXPECT_DOUBLE_EQ(a.level("e"), 50.0);
  EXPECT_FALSE(a.has_level("x"));
  EXPECT_THROW(a.level("x"), Error);
  EXPECT_THROW(parse_atom_preset(R"({"label": "x", "levels": {"g": 0}})"), ConfigError);
  EXPECT_THROW(parse_atom_preset(R"({"label": "x", "mass_kg": -1, "levels": {"g": 0}})"), ConfigError);
  EXPECT_THROW(parse_atom_preset(R"({"label": "x", "mass_kg": 1, "levels": {}})"), ConfigError);
  EXPECT_THROW(parse_atom_preset("{not json"), ConfigError);
}

TEST(FiveLevel, GapIsSpectralSeparation) {
  const SystemSpec s = five_level_system();
  const Blocks b = finite_blocks(s, 0.0);
  // independent: smallest ancilla eigenvalue minus largest relevant eigenvalue
  Eigen::SelfAdjointEigenSolver<Matrix> ed(b.delta), ex(b.xi);
  const double gap = ex.eigenvalues().minCoeff() - ed.eigenvalues().maxCoeff();
  EXPECT_DOUBLE_EQ(gap, 14.0);
  const ValidityReport r = validity_report(s, 0.0, 3.0);
  EXPECT_DOUBLE_EQ(r.gamma_star, 14.0);
  EXPECT_NE(r.verdict, Verdict::fail);
  EXPECT_EQ(r.smoothness, 0.0);
  // coupling norm: largest singular value of the 2x3 block
  Eigen::JacobiSVD<Matrix> svd(b.omega);
  EXPECT_NEAR(r.coupling_norm, svd.singularValues()(0), 1e-12);
  EXPECT_NEAR(r.coupling_ratio, svd.singularValues()(0) / 14.0, 1e-12);
}

TEST(FiveLevel, StrongCouplingIsFlagged) {
  FiveLevelParams p;
  p.coupling *= 20.0;
  const ValidityReport r = validity_report(five_level_system(p), 0.0, 3.0);
  EXPECT_DOUBLE_EQ(r.gamma_star, 14.0);
  EXPECT_NE(r.verdict, Verdict::pass);
}

TEST(FiveLevel, OverlappingManifoldsRejected) {
  FiveLevelParams p;
  p.omega_a1 = 5.0;
  const SystemSpec s = five_level_system(p);
  EXPECT_LE(validity_report(s, 0.0, 1.0).gamma_star, 0.0);
  EXPECT_EQ(validity_report(s, 0.0, 1.0).verdict, Verdict::fail);
  try {
    effective_hamiltonian(s);
    FAIL() << "expected a validity error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validity);
  }
}

TEST(Raman, FamilyClosesOnThreeSites) {
  const SystemSpec s = toy_raman();
  auto B = full_basis(s, s.seeds("g"));
  EXPECT_EQ(B->size(), 3u);
  EXPECT_EQ(s.ladder.M, 1);
  EXPECT_DOUBLE_EQ(s.ladder.omega_ref, 1.0);
}

TEST(Raman, FullHamiltonianHermitianAndSparse) {
  const SystemSpec s = toy_raman(PulseShape::sine_squared(20.0, 0.0, 5.0));
  const BlockOperator H = full_hamiltonian(s);
  auto B = std::make_shared<const LadderBasis>(
      LadderBasis::dense(std::vector<LevelId>{0, 1, 2}, s.ladder.n_min, s.ladder.n_max));
  CompiledOperator op(H, B, s.ladder);
  for (double t : {0.0, 1.3, 2.5}) {
    const Matrix M = op.assemble(t, 0.37);
    EXPECT_LT((M - M.adjoint()).norm(), 1e-12 * M.norm());
    for (Eigen::Index j = 0; j < M.cols(); ++j) EXPECT_LE((M.col(j).array().abs() > 0).count(), 3);
  }
}

TEST(Raman, TwoPhotonBookkeeping) {
  const SystemSpec s = toy_raman();
  const TwoPhotonInfo tp = two_photon(s, 0.0);
  EXPECT_DOUBLE_EQ(std::abs(tp.kappa_eff), 2.0);
  EXPECT_DOUBLE_EQ(tp.delta0, -4.0);
  EXPECT_NEAR(tp.p_resonant, 0.0, 1e-15);
  // lab-frame energies: a(p+1) - e(p) - w1 and a(p-1) - g(p) - w2 at p = 0
  EXPECT_DOUBLE_EQ(tp.gamma1, 1000.0 + 1.0 - 50.0 - 550.0);
  EXPECT_DOUBLE_EQ(tp.gamma2, 1000.0 + 1.0 - 604.0);
  EXPECT_DOUBLE_EQ(tp.gamma0, 399.0);
  for (double p : {-0.7, 0.0, 1.9}) {
    EXPECT_DOUBLE_EQ(s.coupling_detuning(0, p), 401.0 + 2.0 * p);
    EXPECT_DOUBLE_EQ(s.coupling_detuning(1, p), 397.0 - 2.0 * p);
  }
}

TEST(Raman, DetuningsAreFrameInvariant) {
  const SystemSpec s = toy_raman();
  const SystemSpec lab = with_frame(s, std::vector<double>(s.space.size(), 0.0));
  for (std::size_t v = 0; v < s.couplings.size(); ++v)
    for (double p : {-1.0, 0.3}) EXPECT_NEAR(lab.coupling_detuning(v, p), s.coupling_detuning(v, p), 1e-12);
}

TEST(Raman, RejectsBadLasers) {
  ComOptions c;
  c.k_ref = 1.0;
  auto env = PulseShape::box(1.0);
  EXPECT_THROW(raman_system(toy_atom(), laser("e", "zz", 550.0, 1.0, env), laser("g", "a", 604.0, -1.0, env), c),
               Error);
  EXPECT_THROW(raman_system(toy_atom(), laser("e", "a", 550.0, 0.0, env), laser("g", "a", 604.0, -1.0, env), c), Error);
}

TEST(Effective, SimplifiedBoxLightShifts) {
  const SystemSpec s = toy_raman();
  EffectiveOptions opt;
  opt.rwa = true;
  const EffectiveHamiltonian eff = effective_hamiltonian(s, opt);
  auto B = std::make_shared<const LadderBasis>(reachable_basis(eff.block, s.seeds("g"), s.ladder.n_min, s.ladder.n_max));
  ASSERT_EQ(B->size(), 2u);
  const Matrix H = CompiledOperator(eff.block, B, s.ladder).assemble(1.0, 0.0);
  const LevelId g = s.space.index("g"), e = s.space.index("e");
  const auto ig = B->find({g, 0});
  const auto ie = B->find({e, -2});
  ASSERT_TRUE(ig && ie);
  // every element runs through a(-1), whose detuning is 397 from both g(0) and e(-2)
  EXPECT_NEAR(H(*ig, *ig).real(), s.diag(g) - 400.0 / 397.0, 1e-12);
  EXPECT_NEAR(H(*ie, *ie).real(), s.diag(e) + 4.0 - 400.0 / 397.0, 1e-12);
  EXPECT_NEAR(std::abs(H(*ie, *ig)), 400.0 / 397.0, 1e-12);
  EXPECT_NEAR(std::abs(H(*ig, *ie)), 400.0 / 397.0, 1e-12);
}

TEST(Effective, ClosedAndQuadratureModesAgree) {
  const SystemSpec s = toy_raman(PulseShape::sine_squared(20.0, 0.0, 5.0));
  EffectiveOptions a, b;
  b.s_mode = SMode::quadrature;
  const auto ea = effective_hamiltonian(s, a), eb = effective_hamiltonian(s, b);
  auto B = std::make_shared<const LadderBasis>(reachable_basis(ea.block, s.seeds("g"), s.ladder.n_min, s.ladder.n_max));
  for (double t : {0.4, 2.2, 4.9}) {
    const Matrix Ha = CompiledOperator(ea.block, B, s.ladder).assemble(t, 0.1);
    const Matrix Hb = CompiledOperator(eb.block, B, s.ladder).assemble(t, 0.1);
    EXPECT_LT((Ha - Hb).norm(), 1e-9 * (1.0 + Ha.norm()));
  }
}

TEST(Effective, HigherOrderNeedsFiniteSystem) {
  EffectiveOptions opt;
  opt.order = 3;
  EXPECT_THROW(effective_hamiltonian(toy_raman(), opt), Error);
  EXPECT_NO_THROW(effective_hamiltonian(five_level_system(), opt));
}

TEST(DoubleRaman, ConventionsDifferOnlyOnCrossedPaths) {
  ComOptions c;
  c.k_ref = 1.0;
  c.window_kicks = 4;
  auto env = PulseShape::box(10.0);
  std::vector<LaserSpec> L{laser("e", "a1", 550.0, 1.0, env), laser("g", "a1", 604.0, -1.0, env),
                           laser("e", "a2", 550.0, -1.0, env), laser("g", "a2", 604.0, 1.0, env)};
  const SystemSpec d = double_raman_system(toy_atom(), L, c, DetuningConvention::derived);
  const SystemSpec p = double_raman_system(toy_atom(), L, c, DetuningConvention::as_published);
  for (double q : {-0.5, 0.0, 0.8}) {
    EXPECT_DOUBLE_EQ(d.coupling_detuning(0, q), p.coupling_detuning(0, q));
    EXPECT_DOUBLE_EQ(d.coupling_detuning(3, q), p.coupling_detuning(3, q));
    // g via a1: a1(q-1) - g(q) - w2
    EXPECT_DOUBLE_EQ(d.coupling_detuning(1, q), 1000.0 + 1.0 - 2.0 * q - 604.0);
    // the listed form uses the e/w1 labels on this path
    EXPECT_DOUBLE_EQ(p.coupling_detuning(1, q), 1000.0 - 50.0 - 550.0 + 1.0 - 2.0 * q);
    EXPECT_NE(d.coupling_detuning(1, q), p.coupling_detuning(1, q));
    EXPECT_NE(d.coupling_detuning(2, q), p.coupling_detuning(2, q));
  }
  EXPECT_THROW(double_raman_system(toy_atom(), {L[0], L[1]}, c), Error);
}

TEST(Bragg, SingleLevelLadder) {
  ComOptions c;
  c.k_ref = 1.0;
  c.window_kicks = 4;
  auto env = PulseShape::box(10.0);
  const SystemSpec s =
      bragg_system(toy_atom(), laser("g", "a", 600.0, 1.0, env), laser("g", "a", 604.0, -1.0, env), c);
  EXPECT_EQ(s.space.relevant().size(), 1u);
  const TwoPhotonInfo tp = two_photon(s, 0.0);
  EXPECT_DOUBLE_EQ(tp.delta0, -4.0);
  EXPECT_NEAR(tp.p_resonant, 0.0, 1e-15);
  EXPECT_THROW(bragg_system(toy_atom(), laser("g", "a", 600.0, 1.0, env), laser("e", "a", 604.0, -1.0, env), c),
               Error);
}
