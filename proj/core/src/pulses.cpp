#include "tdae/pulses.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "tdae/error.hpp"
#include "tdae/quadrature.hpp"

namespace tdae {

const char* to_string(PulseKind k) {
  switch (k) {
    case PulseKind::box: return "box";
    case PulseKind::sine_squared: return "sine_squared";
    case PulseKind::blackman: return "blackman";
    case PulseKind::tabulated: return "tabulated";
  }
  return "unknown";
}

PulseKind pulse_kind_from_string(const std::string& s) {
  if (s == "box") return PulseKind::box;
  if (s == "sine_squared" || s == "sin2") return PulseKind::sine_squared;
  if (s == "blackman") return PulseKind::blackman;
  if (s == "tabulated") return PulseKind::tabulated;
  throw Error(ErrorKind::precondition, "unknown pulse kind '" + s + "'");
}

PulseShape PulseShape::box(double a0, double t0, double T) {
  if (!(T > 0.0)) throw Error(ErrorKind::precondition, "pulse duration must be positive");
  PulseShape p;
  p.kind = PulseKind::box;
  p.a0 = a0;
  p.t0 = t0;
  p.T = T;
  return p;
}

PulseShape PulseShape::sine_squared(double a0, double t0, double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorKind::precondition, "pulse duration must be positive and finite");
  PulseShape p;
  p.kind = PulseKind::sine_squared;
  p.a0 = a0;
  p.t0 = t0;
  p.T = T;
  return p;
}

PulseShape PulseShape::blackman(double a0, double a1, double a2, double t0, double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorKind::precondition, "pulse duration must be positive and finite");
  PulseShape p;
  p.kind = PulseKind::blackman;
  p.a0 = a0;
  p.a1 = a1;
  p.a2 = a2;
  p.t0 = t0;
  p.T = T;
  return p;
}

PulseShape PulseShape::tabulated(std::vector<std::pair<double, double>> samples) {
  if (samples.size() < 2) throw Error(ErrorKind::precondition, "tabulated pulse needs at least two samples");
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (!(samples[i].first > samples[i - 1].first))
      throw Error(ErrorKind::precondition, "tabulated pulse times must be strictly increasing");
  PulseShape p;
  p.kind = PulseKind::tabulated;
  p.samples = std::move(samples);
  p.t0 = p.samples.front().first;
  p.T = p.samples.back().first - p.t0;
  p.a0 = 0.0;
  for (const auto& s : p.samples) p.a0 = std::max(p.a0, std::abs(s.second));
  return p;
}

double PulseShape::start() const { return t0; }
double PulseShape::end() const { return t0 + T; }

bool PulseShape::in_window(double t) const {
  if (kind == PulseKind::box) return t >= t0 && t < t0 + T;
  return t >= t0 && t <= t0 + T;
}

double PulseShape::peak() const {
  switch (kind) {
    case PulseKind::box:
    case PulseKind::sine_squared:
    case PulseKind::tabulated: return std::abs(a0);
    case PulseKind::blackman: {
      double m = 0.0;
      for (int i = 0; i <= 400; ++i) m = std::max(m, std::abs(evaluate(*this, t0 + T * i / 400.0)));
      return m;
    }
  }
  return 0.0;
}

PulseShape PulseShape::scaled(double f) const {
  PulseShape p = *this;
  p.a0 *= f;
  p.a1 *= f;
  p.a2 *= f;
  for (auto& s : p.samples) s.second *= f;
  return p;
}

std::vector<FourierComponent> PulseShape::fourier() const {
  const double w = 2.0 * pi / T;
  switch (kind) {
    case PulseKind::box: return {{a0, 0.0}};
    case PulseKind::sine_squared: return {{0.5 * a0, 0.0}, {-0.25 * a0, w}, {-0.25 * a0, -w}};
    case PulseKind::blackman:
      return {{a0, 0.0}, {-0.5 * a1, w}, {-0.5 * a1, -w}, {0.5 * a2, 2.0 * w}, {0.5 * a2, -2.0 * w}};
    case PulseKind::tabulated: return {};
  }
  return {};
}

double evaluate(const PulseShape& s, double t) {
  if (!s.in_window(t)) return 0.0;
  const double u = t - s.t0;
  switch (s.kind) {
    case PulseKind::box: return s.a0;
    case PulseKind::sine_squared: {
      double v = std::sin(pi * u / s.T);
      return s.a0 * v * v;
    }
    case PulseKind::blackman:
      return s.a0 - s.a1 * std::cos(2.0 * pi * u / s.T) + s.a2 * std::cos(4.0 * pi * u / s.T);
    case PulseKind::tabulated: {
      auto it = std::upper_bound(s.samples.begin(), s.samples.end(), t,
                                 [](double x, const std::pair<double, double>& p) { return x < p.first; });
      if (it == s.samples.end()) return s.samples.back().second;
      if (it == s.samples.begin()) return s.samples.front().second;
      auto lo = it - 1;
      double f = (t - lo->first) / (it->first - lo->first);
      return lo->second + f * (it->second - lo->second);
    }
  }
  return 0.0;
}

double derivative(const PulseShape& s, double t) {
  if (!s.in_window(t)) return 0.0;
  const double u = t - s.t0;
  const double w = 2.0 * pi / s.T;
  switch (s.kind) {
    case PulseKind::box: return 0.0;
    case PulseKind::sine_squared: return 0.5 * s.a0 * w * std::sin(w * u);
    case PulseKind::blackman: return s.a1 * w * std::sin(w * u) - 2.0 * s.a2 * w * std::sin(2.0 * w * u);
    case PulseKind::tabulated: {
      auto it = std::upper_bound(s.samples.begin(), s.samples.end(), t,
                                 [](double x, const std::pair<double, double>& p) { return x < p.first; });
      if (it == s.samples.end() || it == s.samples.begin()) return 0.0;
      auto lo = it - 1;
      return (it->second - lo->second) / (it->first - lo->first);
    }
  }
  return 0.0;
}

namespace {

double sin4_primitive(double u, double T) {
  // integral of sin^4(pi s / T) from 0 to u
  const double x = pi * u / T;
  return (T / pi) * (3.0 * x / 8.0 - std::sin(2.0 * x) / 4.0 + std::sin(4.0 * x) / 32.0);
}

bool same_window(const PulseShape& a, const PulseShape& b) { return a.t0 == b.t0 && a.T == b.T; }

}  // namespace

double pulse_area_quadrature(const PulseShape& s1, const PulseShape& s2, double gamma0, double ta, double tb) {
  if (gamma0 == 0.0) throw PoleError("pulse area needs a nonzero detuning", "gamma0");
  double lo = std::max({ta, s1.start(), s2.start()});
  double hi = std::min({tb, s1.end(), s2.end()});
  if (!(hi > lo)) return 0.0;
  auto f = [&](double t) { return 2.0 * evaluate(s1, t) * evaluate(s2, t) / gamma0; };
  QuadratureOptions opt;
  opt.abs_tol = 1e-15;
  opt.rel_tol = 1e-13;
  // split at tabulated sample times so each panel is smooth
  std::vector<double> cuts{lo, hi};
  for (const auto* s : {&s1, &s2})
    for (const auto& smp : s->samples)
      if (smp.first > lo && smp.first < hi) cuts.push_back(smp.first);
  std::sort(cuts.begin(), cuts.end());
  if (cuts.size() > 2) opt.abs_tol = 1e-15 / static_cast<double>(cuts.size());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += integrate_gk15(f, cuts[i], cuts[i + 1], opt).value;
  return total;
}

double pulse_area_between(const PulseShape& s1, const PulseShape& s2, double gamma0, double ta, double tb) {
  if (gamma0 == 0.0) throw PoleError("pulse area needs a nonzero detuning", "gamma0");
  if (tb < ta) throw Error(ErrorKind::precondition, "pulse area interval reversed");
  if (s1.kind == s2.kind && same_window(s1, s2) &&
      (s1.kind == PulseKind::box || s1.kind == PulseKind::sine_squared)) {
    double lo = std::max(ta, s1.start());
    double hi = std::min(tb, s1.end());
    if (!(hi > lo)) return 0.0;
    double pre = 2.0 * s1.a0 * s2.a0 / gamma0;
    if (s1.kind == PulseKind::box) return pre * (hi - lo);
    return pre * (sin4_primitive(hi - s1.t0, s1.T) - sin4_primitive(lo - s1.t0, s1.T));
  }
  return pulse_area_quadrature(s1, s2, gamma0, ta, tb);
}

double pulse_area(const PulseShape& s1, const PulseShape& s2, double gamma0, double t_end) {
  double ts = std::min(s1.start(), s2.start());
  if (t_end < ts) throw Error(ErrorKind::precondition, "t_end precedes the pulse start");
  return pulse_area_between(s1, s2, gamma0, ts, t_end);
}

double calibrate_amplitude(PulseKind kind, double T, double gamma0, double target_area) {
  if (!(target_area > 0.0)) throw Error(ErrorKind::precondition, "target pulse area must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorKind::precondition, "pulse duration must be positive and finite");
  if (gamma0 == 0.0) throw PoleError("calibration needs a nonzero detuning", "gamma0");
  const double g = std::abs(gamma0);
  switch (kind) {
    case PulseKind::box: return std::sqrt(target_area * g / (2.0 * T));
    case PulseKind::sine_squared: return std::sqrt(4.0 * target_area * g / (3.0 * T));
    case PulseKind::blackman:
    case PulseKind::tabulated:
      throw Error(ErrorKind::calibration, "kind needs explicit coefficients; use calibrate_scale");
  }
  return 0.0;
}

double calibrate_scale(const PulseShape& shape, double gamma0, double target_area) {
  if (!(target_area > 0.0)) throw Error(ErrorKind::precondition, "target pulse area must be positive");
  if (gamma0 == 0.0) throw PoleError("calibration needs a nonzero detuning", "gamma0");
  if (!std::isfinite(shape.end())) throw Error(ErrorKind::calibration, "calibration needs a finite window");
  const double g = std::abs(gamma0);
  auto area = [&](double s2) {
    PulseShape p = shape.scaled(std::sqrt(s2));
    return std::abs(pulse_area(p, p, g, p.end()));
  };
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (area(hi) < target_area) {
    hi *= 4.0;
    if (++guard > 400) throw Error(ErrorKind::calibration, "pulse area cannot reach the target");
  }
  for (int it = 0; it < 400; ++it) {
    double mid = 0.5 * (lo + hi);
    if (area(mid) < target_area)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * hi) return std::sqrt(0.5 * (lo + hi));
  }
  throw Error(ErrorKind::calibration, "bisection on the squared amplitude did not converge");
}

PulseShape load_tabulated_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open pulse table " + path.string());
  std::vector<std::pair<double, double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (line.compare(first, 6, "time_s") == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double t = 0.0, v = 0.0;
    if (!(ss >> t >> v))
      throw Error(ErrorKind::io, path.string() + ":" + std::to_string(lineno) + ": expected time_s,amplitude_rad_per_s");
    rows.emplace_back(t, v);
  }
  return PulseShape::tabulated(std::move(rows));
}

}  // namespace tdae
