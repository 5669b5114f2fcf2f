#include "tdae/elimination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "tdae/error.hpp"
#include "tdae/ode.hpp"

namespace tdae {

namespace {

std::string denominator_name(double omega, double T) {
  if (omega == 0.0) return "gamma";
  double m = omega / (2.0 * pi / T);
  std::ostringstream ss;
  ss << "gamma" << (m > 0 ? "+" : "-");
  double a = std::abs(std::round(m));
  if (a == 1.0)
    ss << "2pi/T";
  else
    ss << static_cast<int>(2 * a) << "pi/T";
  return ss.str();
}

void check_poles(const PulseShape& j, double gamma) {
  const auto comps = j.fourier();
  for (const auto& c : comps) {
    double scale = std::max({std::abs(gamma), std::abs(c.omega), std::isfinite(j.T) ? 2.0 * pi / j.T : 0.0});
    if (std::abs(gamma + c.omega) <= pole_rel_tol * scale || gamma + c.omega == 0.0)
      throw PoleError("S integral closed form is singular at " + denominator_name(c.omega, j.T), denominator_name(c.omega, j.T));
  }
}

}  // namespace

cplx s_closed(const PulseShape& n, const PulseShape& j, double gamma, double t0, double t) {
  if (j.kind == PulseKind::tabulated) throw Error(ErrorKind::precondition, "no closed form for tabulated pulses");
  check_poles(j, gamma);
  const double on = evaluate(n, t);
  if (on == 0.0) return {};
  const double lo = std::max(t0, j.start());
  const double hi = std::min(t, j.end());
  if (!(hi > lo)) return {};
  cplx acc{};
  for (const auto& c : j.fourier()) {
    if (c.c == 0.0) continue;
    cplx e_hi = std::exp(I * (c.omega * (hi - j.t0) - gamma * (t - hi)));
    cplx e_lo = std::exp(I * (c.omega * (lo - j.t0) - gamma * (t - lo)));
    acc += c.c * (e_hi - e_lo) / (gamma + c.omega);
  }
  return -on * acc;
}

cplx s_rwa(const PulseShape& n, const PulseShape& j, double gamma, double t) {
  if (gamma == 0.0) throw PoleError("S integral simplified form is singular at gamma", "gamma");
  return -evaluate(n, t) * evaluate(j, t) / gamma;
}

double rwa_ratio(const PulseShape& j, double gamma) {
  if (!std::isfinite(j.T)) return 0.0;
  return (2.0 * pi / j.T) / std::abs(gamma);
}

cplx s_quadrature(const PulseShape& n, const PulseShape& j, double gamma, double t0, double t, double tol) {
  const double on = evaluate(n, t);
  if (on == 0.0) return {};
  const double lo = std::max(t0, j.start());
  const double hi = std::min(t, j.end());
  if (!(hi > lo)) return {};
  auto f = [&](double s) { return evaluate(j, s) * std::exp(-I * gamma * (t - s)); };
  QuadratureOptions opt;
  opt.abs_tol = tol / std::abs(on);
  opt.rel_tol = 0.0;
  opt.max_panel = gamma != 0.0 ? pi / (4.0 * std::abs(gamma)) : std::numeric_limits<double>::infinity();
  std::vector<double> cuts{lo, hi};
  for (const auto& smp : j.samples)
    if (smp.first > lo && smp.first < hi) cuts.push_back(smp.first);
  std::sort(cuts.begin(), cuts.end());
  opt.abs_tol /= static_cast<double>(cuts.size() - 1);
  cplx J{};
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) J += integrate_gk15(f, cuts[i], cuts[i + 1], opt).value;
  return -I * on * J;
}

SIntegralValue s_integral_closed(const SIntegralSpec& spec, double p, double t, bool rwa) {
  const double g = spec.gamma(p);
  SIntegralValue out;
  out.rwa = rwa;
  out.rwa_ratio = rwa_ratio(spec.shape_j, g);
  out.value = rwa ? s_rwa(spec.shape_n, spec.shape_j, g, t) : s_closed(spec.shape_n, spec.shape_j, g, spec.t0, t);
  return out;
}

cplx s_integral_quadrature(const SIntegralSpec& spec, double p, double t, double tol) {
  return s_quadrature(spec.shape_n, spec.shape_j, spec.gamma(p), spec.t0, t, tol);
}

namespace {

struct Eig {
  Matrix V, Vinv;
  Vector vals;
};

Eig decompose(const Matrix& A, double cond_limit) {
  Eig e;
  if ((A - A.adjoint()).norm() <= 1e-14 * std::max(1.0, A.norm())) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(A);
    e.V = es.eigenvectors();
    e.Vinv = e.V.adjoint();
    e.vals = es.eigenvalues().cast<cplx>();
    return e;
  }
  Eigen::ComplexEigenSolver<Matrix> es(A);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::decomposition, "eigendecomposition failed");
  e.V = es.eigenvectors();
  Eigen::JacobiSVD<Matrix> svd(e.V);
  const auto& sv = svd.singularValues();
  double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond < cond_limit)) throw Error(ErrorKind::decomposition, "generator is defective (eigenvector condition too large)");
  e.Vinv = e.V.inverse();
  e.vals = es.eigenvalues();
  return e;
}

cplx phi(cplx lambda, double tau) {
  // -i int_0^tau exp(-i lambda u) du
  cplx x = lambda * tau;
  if (std::abs(x) < 1e-6) return -I * tau * (1.0 - I * x / 2.0 - x * x / 6.0);
  return -(1.0 - std::exp(-I * x)) / lambda;
}

}  // namespace

Matrix projector_first_order_constant(const Matrix& delta, const Matrix& xi, const Matrix& omega, double t0, double t,
                                      const ProjectorOptions& opt) {
  if (omega.rows() != xi.rows() || omega.cols() != delta.rows())
    throw Error(ErrorKind::precondition, "coupling shape does not match the blocks");
  try {
    Eig ex = decompose(xi, opt.condition_limit);
    Eig ed = decompose(delta.adjoint(), opt.condition_limit);
    Matrix G = ex.Vinv * omega * ed.V;
    const double tau = t - t0;
    for (Eigen::Index k = 0; k < G.rows(); ++k)
      for (Eigen::Index m = 0; m < G.cols(); ++m) G(k, m) *= phi(ex.vals(k) - ed.vals(m), tau);
    return ex.V * G * ed.Vinv;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::decomposition || !opt.allow_ode_fallback) throw;
    return sylvester_ode(delta, xi, [omega](double) { return omega; }, t0, t, opt.tol);
  }
}

Matrix sylvester_ode(const Matrix& delta, const Matrix& xi, const MatrixFn& F, double t0, double t, double tol) {
  const Eigen::Index b = xi.rows(), a = delta.rows();
  std::vector<cplx> y(static_cast<std::size_t>(a * b), cplx{});
  if (t == t0) return Matrix::Zero(b, a);
  auto rhs = [&](double s, std::span<const cplx> yy, std::span<cplx> dy) {
    Eigen::Map<const Matrix> P(yy.data(), b, a);
    Eigen::Map<Matrix> D(dy.data(), b, a);
    D = -I * (xi * P - P * delta + F(s));
  };
  DP45Options o;
  o.rtol = std::max(tol, 1e-13);
  o.atol = std::max(tol * 1e-2, 1e-16);
  double samples[1] = {t};
  Matrix out = Matrix::Zero(b, a);
  dormand_prince(rhs, t0, y, samples,
                 [&](std::size_t, double, std::span<const cplx> yy) { out = Eigen::Map<const Matrix>(yy.data(), b, a); }, o);
  return out;
}

Matrix sylvester_integral(const Matrix& delta, const Matrix& xi, const MatrixFn& F, double t0, double t,
                          const ProjectorOptions& opt) {
  const Eigen::Index b = xi.rows(), a = delta.rows();
  if (!(t > t0)) return Matrix::Zero(b, a);
  Eig ex, ed;
  try {
    ex = decompose(xi, opt.condition_limit);
    ed = decompose(delta.adjoint(), opt.condition_limit);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::decomposition || !opt.allow_ode_fallback) throw;
    return sylvester_ode(delta, xi, F, t0, t, opt.tol);
  }
  Matrix lambda(b, a);
  double lmax = 0.0;
  for (Eigen::Index k = 0; k < b; ++k)
    for (Eigen::Index m = 0; m < a; ++m) {
      lambda(k, m) = ex.vals(k) - ed.vals(m);
      lmax = std::max(lmax, std::abs(lambda(k, m)));
    }
  auto integrand = [&](double s) -> Matrix {
    Matrix G = ex.Vinv * F(s) * ed.V;
    for (Eigen::Index k = 0; k < b; ++k)
      for (Eigen::Index m = 0; m < a; ++m) G(k, m) *= std::exp(-I * lambda(k, m) * (t - s));
    return G;
  };
  QuadratureOptions q;
  q.abs_tol = opt.tol;
  q.rel_tol = opt.tol;
  q.max_panel = lmax > 0.0 ? pi / (4.0 * lmax) : std::numeric_limits<double>::infinity();
  Matrix J = integrate_gk15(integrand, t0, t, q).value;
  return ex.V * (-I * J) * ed.Vinv;
}

Matrix projector_first_order(const Matrix& delta, const Matrix& xi, const MatrixFn& omega, double t0, double t,
                             const ProjectorOptions& opt) {
  return sylvester_integral(delta, xi, omega, t0, t, opt);
}

Matrix projector_inhomogeneity(int ell, std::span<const MatrixFn> lower, const MatrixFn& omega, double s) {
  Matrix W = omega(s);
  if (ell <= 0) return Matrix::Zero(W.rows(), W.cols());
  if (static_cast<int>(lower.size()) < ell) throw Error(ErrorKind::precondition, "projector order needs all lower orders");
  Matrix Wd = W.adjoint();
  if (ell == 1) {
    Matrix P0 = lower[0](s);
    return W - P0 * Wd * P0;
  }
  Matrix F = Matrix::Zero(W.rows(), W.cols());
  std::vector<Matrix> P;
  P.reserve(static_cast<std::size_t>(ell));
  for (int k = 0; k < ell; ++k) P.push_back(lower[static_cast<std::size_t>(k)](s));
  for (int k = 0; k < ell; ++k) {
    const Matrix& L = P[static_cast<std::size_t>(ell - 1 - k)];
    const Matrix& R = P[static_cast<std::size_t>(k)];
    if (L.isZero(0.0) || R.isZero(0.0)) continue;
    F -= L * Wd * R;
  }
  return F;
}

Matrix projector_order(int ell, std::span<const MatrixFn> lower, const Matrix& delta, const Matrix& xi,
                       const MatrixFn& omega, double t0, double t, const ProjectorOptions& opt) {
  if (ell < 0) throw Error(ErrorKind::precondition, "projector order must be non-negative");
  if (ell == 0) return Matrix::Zero(xi.rows(), delta.rows());
  std::vector<MatrixFn> lw(lower.begin(), lower.end());
  auto F = [lw, ell, omega](double s) { return projector_inhomogeneity(ell, lw, omega, s); };
  return sylvester_integral(delta, xi, F, t0, t, opt);
}

std::vector<MatrixFn> projector_series(int order, const Matrix& delta, const Matrix& xi, const MatrixFn& omega,
                                       double t0, bool constant_omega, const ProjectorOptions& opt) {
  std::vector<MatrixFn> P;
  const Eigen::Index b = xi.rows(), a = delta.rows();
  P.push_back([b, a](double) { return Matrix(Matrix::Zero(b, a)); });
  if (order >= 1) {
    if (constant_omega) {
      Matrix W = omega(t0);
      P.push_back([=](double t) { return projector_first_order_constant(delta, xi, W, t0, t, opt); });
    } else {
      P.push_back([=](double t) { return projector_first_order(delta, xi, omega, t0, t, opt); });
    }
  }
  for (int ell = 2; ell <= order; ++ell) {
    if (ell == 2) {
      // F_2 = -(P_1 W^dag P_0 + P_0 W^dag P_1) vanishes with P_0 = 0
      P.push_back([b, a](double) { return Matrix(Matrix::Zero(b, a)); });
      continue;
    }
    std::vector<MatrixFn> lower = P;
    P.push_back([=](double t) { return projector_order(ell, lower, delta, xi, omega, t0, t, opt); });
  }
  return P;
}

namespace {

Matrix checked_inverse(const Matrix& A, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(A);
  if (!(lu.rcond() > 1e-13)) throw Error(ErrorKind::inversion, std::string(what) + " is singular");
  return lu.inverse();
}

}  // namespace

Matrix markov_hamiltonian(const Matrix& delta, const Matrix& xi, const Matrix& omega) {
  Matrix xinv = checked_inverse(xi, "Xi");
  return delta - omega.adjoint() * xinv * omega;
}

Matrix paulisch_hamiltonian(const Matrix& delta, const Matrix& xi, const Matrix& omega) {
  Matrix xinv = checked_inverse(xi, "Xi");
  Matrix one = Matrix::Identity(delta.rows(), delta.cols());
  Matrix factor = checked_inverse(one + omega.adjoint() * xinv * xinv * omega, "1 + Omega^dag Xi^-2 Omega");
  return factor * (delta - omega.adjoint() * xinv * omega);
}

Matrix sanz_hamiltonian(const Matrix& delta, const Matrix& xi, const Matrix& omega) {
  Matrix xinv = checked_inverse(xi, "Xi");
  Matrix q = omega.adjoint() * xinv * xinv * omega;
  return delta - omega.adjoint() * xinv * omega - 0.5 * (q * delta + delta * q);
}

Matrix commuting_limit_hamiltonian(const Matrix& delta, const Matrix& xi, const Matrix& omega) {
  auto offdiag = [](const Matrix& A) {
    Matrix B = A;
    B.diagonal().setZero();
    return B.norm();
  };
  if (offdiag(delta) > 0.0 || offdiag(xi) > 0.0)
    throw Error(ErrorKind::precondition, "commuting limit needs diagonal Delta and Xi");
  double scale = 0.0;
  for (Eigen::Index k = 0; k < xi.rows(); ++k)
    for (Eigen::Index m = 0; m < delta.rows(); ++m) scale = std::max(scale, std::abs(xi(k, k) - delta(m, m)));
  Matrix H = delta;
  for (Eigen::Index k = 0; k < xi.rows(); ++k)
    for (Eigen::Index m = 0; m < delta.rows(); ++m) {
      cplx den = xi(k, k) - delta(m, m);
      if (std::abs(den) < 1e-9 * scale || den == cplx{})
        throw PoleError("degenerate pair Xi(" + std::to_string(k) + ") = Delta(" + std::to_string(m) + ")",
                        "Xi_" + std::to_string(k) + std::to_string(k) + "-Delta_" + std::to_string(m) +
                            std::to_string(m));
      for (Eigen::Index l = 0; l < delta.rows(); ++l) H(l, m) -= std::conj(omega(k, l)) * omega(k, m) / den;
    }
  return H;
}

}  // namespace tdae
