#pragma once

#include <complex>

#include <Eigen/Dense>

namespace slp {

using cplx = std::complex<double>;

using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace slp
