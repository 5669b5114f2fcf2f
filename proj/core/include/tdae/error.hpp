#pragma once

#include <stdexcept>
#include <string>

namespace tdae {

enum class ErrorKind {
  precondition,
  truncation,
  pole,
  quadrature,
  calibration,
  decomposition,
  inversion,
  grid,
  stiffness,
  alignment,
  validity,
  config,
  io,
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, double lost)
      : Error(ErrorKind::truncation, what), lost_norm(lost) {}
  double lost_norm;
};

class PoleError : public Error {
 public:
  PoleError(const std::string& what, std::string denom)
      : Error(ErrorKind::pole, what), denominator(std::move(denom)) {}
  std::string denominator;
};

class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double estimate)
      : Error(ErrorKind::quadrature, what), error_estimate(estimate) {}
  double error_estimate;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string f, const std::string& what)
      : Error(ErrorKind::config, what), field(std::move(f)) {}
  std::string field;
};

}  // namespace tdae
