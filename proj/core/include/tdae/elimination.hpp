#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tdae/pulses.hpp"
#include "tdae/quadrature.hpp"
#include "tdae/types.hpp"

namespace tdae {

// S_nj(gamma, t) = -i Omega_n*(t) * int_{t0}^{t} Omega_j(s) exp(-i gamma (t - s)) ds
struct SIntegralSpec {
  PulseShape shape_n;
  PulseShape shape_j;
  std::function<double(double p)> gamma;
  double t0 = 0.0;
};

struct SIntegralValue {
  cplx value;
  bool rwa = false;
  double rwa_ratio = 0.0;  // (2*pi/T) / |gamma|; the simplified form needs this << 1
};

inline constexpr double pole_rel_tol = 1e-12;

cplx s_closed(const PulseShape& n, const PulseShape& j, double gamma, double t0, double t);
cplx s_rwa(const PulseShape& n, const PulseShape& j, double gamma, double t);
cplx s_quadrature(const PulseShape& n, const PulseShape& j, double gamma, double t0, double t, double tol);
double rwa_ratio(const PulseShape& j, double gamma);

SIntegralValue s_integral_closed(const SIntegralSpec& spec, double p, double t, bool rwa = false);
cplx s_integral_quadrature(const SIntegralSpec& spec, double p, double t, double tol);

struct ProjectorOptions {
  double tol = 1e-12;
  double condition_limit = 1e10;
  bool allow_ode_fallback = true;
};

// P_1 for constant Omega: closed-form time integral in the eigenbases.
Matrix projector_first_order_constant(const Matrix& delta, const Matrix& xi, const Matrix& omega, double t0, double t,
                                      const ProjectorOptions& opt = {});
Matrix projector_first_order(const Matrix& delta, const Matrix& xi, const MatrixFn& omega, double t0, double t,
                             const ProjectorOptions& opt = {});
// F_l from the lower orders, then the Sylvester-solution integral.
Matrix projector_order(int ell, std::span<const MatrixFn> lower, const Matrix& delta, const Matrix& xi,
                       const MatrixFn& omega, double t0, double t, const ProjectorOptions& opt = {});
Matrix projector_inhomogeneity(int ell, std::span<const MatrixFn> lower, const MatrixFn& omega, double s);
// Dense time stepping of i dP/dt = Xi P - P Delta + F(t), P(t0) = 0.
Matrix sylvester_ode(const Matrix& delta, const Matrix& xi, const MatrixFn& F, double t0, double t, double tol);
// Generic inhomogeneity integral -i int U_Xi(s,t) F(s) U_Delta^dag(s,t) ds.
Matrix sylvester_integral(const Matrix& delta, const Matrix& xi, const MatrixFn& F, double t0, double t,
                          const ProjectorOptions& opt = {});

// Series P_1..P_N as callables sharing the matrices.
std::vector<MatrixFn> projector_series(int order, const Matrix& delta, const Matrix& xi, const MatrixFn& omega,
                                       double t0, bool constant_omega, const ProjectorOptions& opt = {});

Matrix markov_hamiltonian(const Matrix& delta, const Matrix& xi, const Matrix& omega);
Matrix paulisch_hamiltonian(const Matrix& delta, const Matrix& xi, const Matrix& omega);
Matrix sanz_hamiltonian(const Matrix& delta, const Matrix& xi, const Matrix& omega);
Matrix commuting_limit_hamiltonian(const Matrix& delta, const Matrix& xi, const Matrix& omega);

}  // namespace tdae
