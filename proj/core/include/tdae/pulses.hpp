#pragma once

#include <filesystem>
#include <limits>
#include <utility>
#include <vector>

#include "tdae/types.hpp"

namespace tdae {

enum class PulseKind { box, sine_squared, blackman, tabulated };

const char* to_string(PulseKind k);
PulseKind pulse_kind_from_string(const std::string& s);

// Omega(s) = sum c * exp(i*omega*(s - t0)) inside the window.
struct FourierComponent {
  double c = 0.0;
  double omega = 0.0;
};

struct PulseShape {
  PulseKind kind = PulseKind::box;
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double t0 = 0.0;
  double T = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> samples;

  static PulseShape box(double a0, double t0 = 0.0, double T = std::numeric_limits<double>::infinity());
  static PulseShape sine_squared(double a0, double t0, double T);
  static PulseShape blackman(double a0, double a1, double a2, double t0, double T);
  static PulseShape tabulated(std::vector<std::pair<double, double>> samples);

  double start() const;
  double end() const;
  bool in_window(double t) const;
  double peak() const;
  PulseShape scaled(double factor) const;
  std::vector<FourierComponent> fourier() const;  // empty for tabulated
};

double evaluate(const PulseShape& shape, double t);
double derivative(const PulseShape& shape, double t);

double pulse_area(const PulseShape& s1, const PulseShape& s2, double gamma0, double t_end);
double pulse_area_between(const PulseShape& s1, const PulseShape& s2, double gamma0, double ta, double tb);
double pulse_area_quadrature(const PulseShape& s1, const PulseShape& s2, double gamma0, double ta, double tb);

// Amplitude a0 of two identical pulses of the given kind reaching target_area at the window end.
double calibrate_amplitude(PulseKind kind, double T, double gamma0, double target_area);
// Common scale factor applied to a template shape (all coefficients) for the same purpose.
double calibrate_scale(const PulseShape& shape, double gamma0, double target_area);

PulseShape load_tabulated_csv(const std::filesystem::path& path);

}  // namespace tdae
