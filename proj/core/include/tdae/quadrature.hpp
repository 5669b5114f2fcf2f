#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include <Eigen/Dense>

#include "tdae/error.hpp"

namespace tdae {

struct QuadratureOptions {
  double abs_tol = 1e-13;
  double rel_tol = 1e-12;
  double max_panel = std::numeric_limits<double>::infinity();
  std::size_t max_subdivisions = 200000;
};

template <class T>
struct QuadratureResult {
  T value;
  double error = 0.0;
  std::size_t evaluations = 0;
};

namespace detail {

inline double qnorm(double x) { return std::abs(x); }
inline double qnorm(const std::complex<double>& x) { return std::abs(x); }
template <class Derived>
double qnorm(const Eigen::MatrixBase<Derived>& m) {
  return m.norm();
}

inline constexpr std::array<double, 8> gk_x = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> gk_w = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> g_w = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T>
struct Panel {
  double a, b;
  T value;
  double error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
auto gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  auto fc = f(c);
  using T = decltype(fc);
  T kron = fc * gk_w[7];
  T gauss = fc * g_w[3];
  for (int j = 0; j < 7; ++j) {
    auto f1 = f(c - h * gk_x[static_cast<std::size_t>(j)]);
    auto f2 = f(c + h * gk_x[static_cast<std::size_t>(j)]);
    T s = f1 + f2;
    kron = kron + s * gk_w[static_cast<std::size_t>(j)];
    if (j % 2 == 1) gauss = gauss + s * g_w[static_cast<std::size_t>(j / 2)];
  }
  T k = kron * h;
  T g = gauss * h;
  T diff = k - g;
  return Panel<T>{a, b, k, qnorm(diff)};
}

}  // namespace detail

// Globally adaptive 15-point Gauss-Kronrod; the interval is first cut into
// panels no longer than opt.max_panel.
template <class F>
auto integrate_gk15(F&& f, double a, double b, const QuadratureOptions& opt = {}) {
  using T = decltype(detail::gk15(f, a, a + 1.0).value);
  if (!(b > a)) {
    T zero = f(a) * 0.0;
    return QuadratureResult<T>{zero, 0.0, 1};
  }
  std::size_t n0 = 1;
  if (std::isfinite(opt.max_panel) && opt.max_panel > 0.0)
    n0 = static_cast<std::size_t>(std::ceil((b - a) / opt.max_panel));
  n0 = std::max<std::size_t>(n0, 1);
  if (n0 > opt.max_subdivisions) throw QuadratureError("too many initial panels", std::numeric_limits<double>::infinity());

  std::priority_queue<detail::Panel<T>> heap;
  std::size_t evals = 0;
  const double w = (b - a) / static_cast<double>(n0);
  for (std::size_t i = 0; i < n0; ++i) {
    double lo = a + w * static_cast<double>(i);
    double hi = (i + 1 == n0) ? b : a + w * static_cast<double>(i + 1);
    heap.push(detail::gk15(f, lo, hi));
    evals += 15;
  }
  auto totals = [&heap]() {
    auto copy = heap;
    T sum = copy.top().value * 0.0;
    double err = 0.0;
    while (!copy.empty()) {
      sum = sum + copy.top().value;
      err += copy.top().error;
      copy.pop();
    }
    return std::pair<T, double>{sum, err};
  };
  // running sums avoid rescanning the heap on every split
  T value = totals().first;
  double err = totals().second;
  std::size_t splits = 0;
  while (err > std::max(opt.abs_tol, opt.rel_tol * detail::qnorm(value))) {
    if (splits++ >= opt.max_subdivisions) throw QuadratureError("adaptive quadrature did not converge", err);
    auto worst = heap.top();
    heap.pop();
    double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) throw QuadratureError("panel width underflow", err);
    auto left = detail::gk15(f, worst.a, mid);
    auto right = detail::gk15(f, mid, worst.b);
    evals += 30;
    value = value - worst.value + left.value + right.value;
    err = err - worst.error + left.error + right.error;
    heap.push(left);
    heap.push(right);
    if (splits % 256 == 0) std::tie(value, err) = totals();
  }
  std::tie(value, err) = totals();
  return QuadratureResult<T>{value, err, evals};
}

}  // namespace tdae
