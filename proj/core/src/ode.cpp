#include "tdae/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tdae/error.hpp"

namespace tdae {

namespace {

constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

}  // namespace

DP45Stats dormand_prince(const OdeRhs& f, double t0, std::vector<cplx>& y, std::span<const double> samples,
                         const OdeSample& on_sample, const DP45Options& opt, const OdeStep& on_step) {
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) throw Error(ErrorKind::precondition, "tolerances must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i] < t0) throw Error(ErrorKind::precondition, "sample time precedes t0");
    if (i > 0 && samples[i] < samples[i - 1]) throw Error(ErrorKind::precondition, "sample times must be sorted");
  }
  DP45Stats st;
  const std::size_t n = y.size();
  std::vector<cplx> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y1(n), tmp(n), r5(n);
  std::size_t next = 0;
  while (next < samples.size() && samples[next] == t0) {
    if (on_sample) on_sample(next, t0, y);
    ++next;
  }
  if (next == samples.size()) return st;
  const double t_end = samples.back();

  auto eval = [&](double t, const std::vector<cplx>& yy, std::vector<cplx>& k) {
    f(t, yy, k);
    ++st.evaluations;
  };
  auto err_norm = [&](const std::vector<cplx>& y0v, const std::vector<cplx>& y1v, const std::vector<cplx>& ev) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double sc = opt.atol + opt.rtol * std::max(std::abs(y0v[i]), std::abs(y1v[i]));
      double r = std::abs(ev[i]) / sc;
      s += r * r;
    }
    return n ? std::sqrt(s / static_cast<double>(n)) : 0.0;
  };

  double t = t0;
  eval(t, y, k1);
  double h = opt.fixed_step > 0.0 ? opt.fixed_step : opt.initial_step;
  if (!(h > 0.0)) {
    double d0 = 0.0, d1n = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double sc = opt.atol + opt.rtol * std::abs(y[i]);
      d0 += std::norm(y[i]) / (sc * sc);
      d1n += std::norm(k1[i]) / (sc * sc);
    }
    d0 = std::sqrt(d0 / std::max<std::size_t>(n, 1));
    d1n = std::sqrt(d1n / std::max<std::size_t>(n, 1));
    h = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 * std::max(1.0, t_end - t0) : 0.01 * d0 / d1n;
  }
  h = std::min({h, opt.max_step, t_end - t0});
  double err_prev = 1e-4;

  while (t < t_end) {
    if (st.accepted + st.rejected >= opt.max_steps) throw Error(ErrorKind::stiffness, "maximum number of steps exceeded");
    bool last = false;
    if (t + h >= t_end || (t_end - (t + h)) < 1e-12 * std::abs(t_end)) {
      h = t_end - t;
      last = true;
    }
    if (h <= 1e-14 * std::max(1.0, std::abs(t)))
      throw Error(ErrorKind::stiffness, "step size underflow at t=" + std::to_string(t));

    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    eval(t + c2 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    eval(t + c3 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    eval(t + c4 * h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    eval(t + c5 * h, tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    const double tn = last ? t_end : t + h;
    eval(tn, tmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    eval(tn, y1, k7);

    double err = 0.0;
    if (opt.fixed_step <= 0.0) {
      for (std::size_t i = 0; i < n; ++i)
        tmp[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      err = err_norm(y, y1, tmp);
      if (!std::isfinite(err)) err = 1e10;
    }

    if (err <= 1.0) {
      // dense output for samples in (t, tn]
      while (next < samples.size() && samples[next] <= tn) {
        const double ts = samples[next];
        if (ts == tn) {
          if (on_sample) on_sample(next, ts, y1);
        } else {
          const double th = (ts - t) / h, th1 = 1.0 - th;
          for (std::size_t i = 0; i < n; ++i) {
            cplx r1 = y[i];
            cplx r2 = y1[i] - y[i];
            cplx r3 = h * k1[i] - r2;
            cplx r4 = r2 - h * k7[i] - r3;
            cplx rr5 = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
            r5[i] = r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * rr5)));
          }
          if (on_sample) on_sample(next, ts, r5);
        }
        ++next;
      }
      ++st.accepted;
      st.min_step = std::min(st.min_step, h);
      st.max_step = std::max(st.max_step, h);
      y.swap(y1);
      k1.swap(k7);
      t = tn;
      if (on_step) on_step(t, h, y);
      if (opt.fixed_step <= 0.0) {
        // PI controller (Hairer's dopri5 defaults)
        double fac = std::pow(std::max(err, 1e-10), 0.17) / std::pow(err_prev, 0.04) / 0.9;
        fac = std::clamp(fac, 0.1, 5.0);
        err_prev = std::max(err, 1e-4);
        h = std::min(h / fac, opt.max_step);
      }
    } else {
      ++st.rejected;
      double fac = std::clamp(std::pow(err, 0.2) / 0.9, 1.0, 5.0);
      h /= fac;
    }
  }
  return st;
}

}  // namespace tdae
