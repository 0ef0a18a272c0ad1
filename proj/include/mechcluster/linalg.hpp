#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mechcluster {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Matrix2 = Eigen::Matrix2d;

// Thrown when a computation leaves the domain where its result is meaningful
// (non-physical covariance, unstable drift, diverging integration).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = std::numbers::pi;

// Omega = (+) [[0, 1], [-1, 0]] over n modes.
inline Matrix symplectic_form(std::size_t n_modes) {
  Matrix omega = Matrix::Zero(2 * n_modes, 2 * n_modes);
  for (std::size_t j = 0; j < n_modes; ++j) {
    const auto i = static_cast<Eigen::Index>(2 * j);
    omega(i, i + 1) = 1.0;
    omega(i + 1, i) = -1.0;
  }
  return omega;
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// Moore-Penrose pseudoinverse; singular values below rel_tol * max are dropped.
inline Matrix pseudo_inverse(const Matrix& m, double rel_tol = 1e-12) {
  if (m.size() == 0) return m.transpose();
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = rel_tol * (s.size() > 0 ? s(0) : 0.0);
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Principal square root of a symmetric positive-definite matrix.
inline Matrix spd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw NumericalError("spd_sqrt: argument is not positive definite");
  }
  return es.operatorSqrt();
}

// Rows/columns of the quadratures belonging to `modes`, in the given order.
inline std::vector<Eigen::Index> quadrature_indices(std::span<const std::size_t> modes) {
  std::vector<Eigen::Index> idx;
  idx.reserve(2 * modes.size());
  for (auto m : modes) {
    idx.push_back(static_cast<Eigen::Index>(2 * m));
    idx.push_back(static_cast<Eigen::Index>(2 * m + 1));
  }
  return idx;
}

inline Matrix select(const Matrix& m, std::span<const Eigen::Index> rows,
                     std::span<const Eigen::Index> cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(rows[r], cols[c]);
    }
  }
  return out;
}

// Block-diagonal direct sum.
inline Matrix direct_sum(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

// Passive rotation taking (q, p) to (X_phi, X_{phi + pi/2}) with X_phi = q cos + p sin.
inline Matrix2 rotation(double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  Matrix2 r;
  r << c, s, -s, c;
  return r;
}

}  // namespace mechcluster
