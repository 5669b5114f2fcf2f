#include <gtest/gtest.h>

#include <random>

#include "tdae/error.hpp"
#include "tdae/hilbert.hpp"

using namespace tdae;

namespace {

// dense reference: (H psi)_{row, n+shift} += coeff(p0 + n/M, t) psi_{col, n}
Matrix dense_reference(const BlockOperator& op, const LadderBasis& B, const MomentumLadder& L, double t, double p0) {
  Matrix H = Matrix::Zero(B.size(), B.size());
  for (std::size_t j = 0; j < B.size(); ++j) {
    const Site s = B.site(j);
    for (const auto& term : op.terms) {
      if (term.col != s.level) continue;
      auto i = B.find({term.row, s.n + term.shift});
      if (i) H(*i, j) += term.coeff(L.momentum(p0, s.n), t);
    }
    for (const auto& d : op.dense) {
      auto it = std::find(d.levels.begin(), d.levels.end(), s.level);
      if (it == d.levels.end()) continue;
      const Matrix m = d.matrix(t);
      const auto c = it - d.levels.begin();
      for (std::size_t r = 0; r < d.levels.size(); ++r) {
        auto i = B.find({d.levels[r], s.n});
        if (i) H(*i, j) += m(static_cast<Eigen::Index>(r), c);
      }
    }
  }
  return H;
}

BlockOperator lambda_operator(double omega_ref) {
  // levels g = 0 and e = 1 coupled through a = 2 with opposite kicks
  BlockOperator op;
  auto kin = [omega_ref](double p, double) { return cplx(omega_ref * p * p); };
  for (LevelId l = 0; l < 3; ++l)
    op.terms.push_back({l, l, 0, [kin, l](double p, double t) { return kin(p, t) + 10.0 * l; }});
  op.terms.push_back({2, 0, 1, [](double, double t) { return cplx(0.3, 0.1) * std::exp(-I * t); }});
  op.terms.push_back({0, 2, -1, [](double, double t) { return cplx(0.3, -0.1) * std::exp(I * t); }});
  op.terms.push_back({2, 1, -1, [](double p, double) { return cplx(0.2 + 0.01 * p); }});
  op.terms.push_back({1, 2, 1, [](double p, double) { return cplx(0.2 + 0.01 * (p + 1.0)); }});
  return op;
}

}  // namespace

TEST(Space, LabelsAndRelevance) {
  InternalSpace s({{"g", 0.0, true}, {"e", 1.0, true}, {"a", 5.0, false}});
  EXPECT_EQ(s.index("e"), 1);
  EXPECT_FALSE(s.find("x").has_value());
  EXPECT_EQ(s.relevant(), (std::vector<LevelId>{0, 1}));
  EXPECT_EQ(s.irrelevant(), (std::vector<LevelId>{2}));
  EXPECT_THROW(InternalSpace({{"g", 0.0, true}, {"g", 1.0, true}}), Error);
  EXPECT_THROW(InternalSpace({{"a", 0.0, false}}), Error);
}

TEST(Ladder, Validation) {
  MomentumLadder L;
  L.n_min = 2;
  L.n_max = 2;
  EXPECT_THROW(L.validate(), Error);
  L.n_min = -1;
  L.base_momenta = {0.1, 0.1};
  EXPECT_THROW(L.validate(), Error);
  L.base_momenta = {0.1, 0.2};
  EXPECT_NO_THROW(L.validate());
  EXPECT_DOUBLE_EQ(L.momentum(0.5, 3), 3.5);
}

TEST(Commensuration, RationalRatios) {
  std::vector<double> k{1.0, -0.5, 0.75};
  auto c = commensurate(k);
  EXPECT_EQ(c.M, 4);
  EXPECT_EQ(c.steps, (std::vector<std::int64_t>{4, -2, 3}));
  EXPECT_EQ(c.max_residual, 0.0);
}

TEST(Commensuration, IrrationalWithinTolerance) {
  std::vector<double> k{1.0, std::sqrt(2.0)};
  auto c = commensurate(k, 1e-6);
  ASSERT_GE(c.M, 1);
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double v = c.M * k[i];
    EXPECT_LE(std::abs(v - c.steps[i]) / std::abs(v), 1e-6);
  }
}

TEST(Basis, ReachableClosureStopsAtWindow) {
  BlockOperator op = lambda_operator(1.0);
  std::vector<Site> seeds{{0, 0}};
  auto B = reachable_basis(op, seeds, -5, 5);
  // g(0) -> a(1) -> e(2): a closed three-site family
  EXPECT_EQ(B.size(), 3u);
  EXPECT_TRUE(B.find({2, 1}).has_value());
  EXPECT_TRUE(B.find({1, 2}).has_value());
  EXPECT_THROW(reachable_basis(op, std::vector<Site>{{0, 9}}, -5, 5), Error);
}

TEST(Basis, SitesOutsideWindowRejected) {
  EXPECT_THROW(LadderBasis({{0, 4}}, -1, 1), Error);
  EXPECT_NO_THROW(LadderBasis({{0, 0}}, 0, 0));
}

TEST(Operator, ApplyMatchesDenseAssembly) {
  MomentumLadder L;
  L.omega_ref = 0.7;
  L.n_min = -3;
  L.n_max = 3;
  BlockOperator op = lambda_operator(L.omega_ref);
  std::vector<LevelId> lv{0, 1, 2};
  auto B = std::make_shared<const LadderBasis>(LadderBasis::dense(lv, -3, 3));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> N;
  StateVector x(B, {0.13, -0.4});
  for (auto& a : x.data()) a = {N(rng), N(rng)};
  // zero the window edges so nothing leaves the basis
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t i = 0; i < B->size(); ++i)
      if (B->site(i).n == -3 || B->site(i).n == 3) x.at(f, i) = 0.0;
  const double t = 0.37;
  StateVector y = apply(op, t, x, L, 0.0);
  CompiledOperator comp(op, B, L);
  for (std::size_t f = 0; f < 2; ++f) {
    const Matrix H = dense_reference(op, *B, L, t, x.base_momenta()[f]);
    Vector xv = Eigen::Map<const Vector>(x.family(f).data(), static_cast<Eigen::Index>(B->size()));
    Vector yv = Eigen::Map<const Vector>(y.family(f).data(), static_cast<Eigen::Index>(B->size()));
    EXPECT_LT((H * xv - yv).norm(), 1e-13);
    EXPECT_LT((comp.assemble(t, x.base_momenta()[f]) - H).norm(), 1e-13);
  }
}

TEST(Operator, HermitianPairAssemblesHermitian) {
  MomentumLadder L;
  L.omega_ref = 1.0;
  BlockOperator op = lambda_operator(1.0);
  std::vector<LevelId> lv{0, 1, 2};
  auto B = std::make_shared<const LadderBasis>(LadderBasis::dense(lv, -2, 2));
  CompiledOperator comp(op, B, L);
  const Matrix H = comp.assemble(0.8, 0.3);
  EXPECT_LT((H - H.adjoint()).norm(), 1e-14);
  // each column couples to at most three sites: itself, one kick up or down
  for (Eigen::Index j = 0; j < H.cols(); ++j) EXPECT_LE((H.col(j).array().abs() > 0).count(), 3);
}

TEST(Operator, AdjointSwapsShifts) {
  MomentumLadder L;
  L.omega_ref = 1.0;
  BlockOperator op = lambda_operator(1.0);
  BlockOperator adj = op.adjoint(L);
  std::vector<LevelId> lv{0, 1, 2};
  auto B = std::make_shared<const LadderBasis>(LadderBasis::dense(lv, -2, 2));
  const Matrix A = CompiledOperator(op, B, L).assemble(0.4, 0.2);
  const Matrix Ad = CompiledOperator(adj, B, L).assemble(0.4, 0.2);
  // interior block only: the window edge truncates differently for the two
  for (std::size_t i = 0; i < B->size(); ++i)
    for (std::size_t j = 0; j < B->size(); ++j) {
      if (std::abs(B->site(i).n) == 2 || std::abs(B->site(j).n) == 2) continue;
      EXPECT_NEAR(std::abs(Ad(i, j) - std::conj(A(j, i))), 0.0, 1e-14);
    }
}

TEST(Operator, LeakageReported) {
  MomentumLadder L;
  BlockOperator op = lambda_operator(1.0);
  std::vector<LevelId> lv{0, 1, 2};
  auto B = std::make_shared<const LadderBasis>(LadderBasis::dense(lv, -1, 1));
  StateVector x(B, {0.0});
  x.set(0, {0, 1}, 1.0);
  EXPECT_THROW(apply(op, 0.0, x, L, 1e-12), TruncationError);
}

TEST(StateVector, NormsAndAccess) {
  std::vector<LevelId> lv{0, 1};
  auto B = std::make_shared<const LadderBasis>(LadderBasis::dense(lv, -1, 1));
  StateVector s(B, {0.0, 0.5});
  s.set(0, {1, -1}, cplx(0.6, 0.0));
  s.set(1, {0, 1}, cplx(0.0, 0.8));
  EXPECT_NEAR(s.norm(), 1.0, 1e-15);
  EXPECT_NEAR(s.family_norm(1), 0.8, 1e-15);
  EXPECT_EQ(s.get(1, {0, 1}), cplx(0.0, 0.8));
  EXPECT_TRUE(s.finite());
  EXPECT_THROW(s.set(0, {0, 5}, 1.0), Error);
}

TEST(Shift, MovesAmplitudesAndCountsLoss) {
  std::vector<LevelId> lv{0};
  auto B = std::make_shared<const LadderBasis>(LadderBasis::dense(lv, -2, 2));
  StateVector s(B, {0.0});
  s.set(0, {0, 1}, 0.6);
  s.set(0, {0, 2}, 0.8);
  auto r = plane_wave_shift(1, s);
  EXPECT_NEAR(std::abs(r.state.get(0, {0, 2})), 0.6, 1e-15);
  EXPECT_NEAR(r.truncation_loss, 0.64, 1e-15);
  EXPECT_THROW(plane_wave_shift(1, s, 1e-3), TruncationError);
}

TEST(Shift, ConjugationIdentityRandom) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uT(0.0, 5.0), up(-3.0, 3.0), uw(-10.0, 10.0);
  std::uniform_int_distribution<int> uk(-6, 6);
  for (int i = 0; i < 100; ++i) {
    ShiftCheckParams prm;
    prm.omega_ref = 0.5;
    prm.M = 2;
    prm.omega1 = uw(rng);
    prm.omega2 = uw(rng);
    const double T = uT(rng), p = up(rng);
    const std::int64_t k = uk(rng);
    auto [lhs, rhs] = conjugate_shift_check(T, k, p, prm);
    // independent phase: kinetic energy difference between p + k/M and p
    const double q = p + static_cast<double>(k) / prm.M;
    const cplx expect = std::exp(-I * T * (prm.omega2 - prm.omega1 + prm.omega_ref * (q * q - p * p)));
    EXPECT_LT(std::abs(lhs - expect), 1e-12);
    EXPECT_LT(std::abs(rhs - expect), 1e-12);
  }
}
