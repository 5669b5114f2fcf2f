#pragma once

#include <complex>
#include <cstdint>
#include <functional>

#include <Eigen/Dense>

namespace tdae {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using MatrixFn = std::function<Matrix(double)>;

inline constexpr cplx I{0.0, 1.0};
inline constexpr double pi = 3.14159265358979323846;

namespace phys {
inline constexpr double hbar = 1.054571817e-34;
inline constexpr double c = 299792458.0;
}  // namespace phys

}  // namespace tdae
