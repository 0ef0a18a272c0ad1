#pragma once

// Uhlmann fidelity F = (tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2 between
// zero-mean Gaussian states, from covariance matrices alone.

#include "mechcluster/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace mechcluster::gaussian {

namespace detail {

inline double clamp_unit(double f) {
  if (!std::isfinite(f)) throw NumericalError("fidelity: non-finite result");
  return std::clamp(f, 0.0, 1.0);
}

// F = 2 / (sqrt(D + d) - sqrt(d)) with D = det(V1 + V2), d = (det V1 - 1)(det V2 - 1), V = 2 cov.
inline double fidelity_single_mode(const Matrix& s1, const Matrix& s2) {
  const double big_delta = 4.0 * (s1 + s2).determinant();
  const double small_delta = std::max(0.0, (4.0 * s1.determinant() - 1.0) * (4.0 * s2.determinant() - 1.0));
  return 2.0 / (std::sqrt(big_delta + small_delta) - std::sqrt(small_delta));
}

// Two-mode closed form:
// F = 1 / ((sqrt(G) + sqrt(L)) - sqrt((sqrt(G) + sqrt(L))^2 - D)),
// D = det(s1 + s2), G = 16 det(O s1 O s2 - I/4), L = 16 det(s1 + iO/2) det(s2 + iO/2).
inline double fidelity_two_mode(const Matrix& s1, const Matrix& s2) {
  const Matrix omega = symplectic_form(2);
  const double delta = (s1 + s2).determinant();
  const double gamma = 16.0 * (omega * s1 * omega * s2 - 0.25 * Matrix::Identity(4, 4)).determinant();
  const Eigen::MatrixXcd iw = std::complex<double>(0.0, 0.5) * omega.cast<std::complex<double>>();
  const double lambda =
      16.0 * ((s1.cast<std::complex<double>>() + iw).determinant() * (s2.cast<std::complex<double>>() + iw).determinant()).real();
  const double root = std::sqrt(std::max(0.0, gamma)) + std::sqrt(std::max(0.0, lambda));
  return 1.0 / (root - std::sqrt(std::max(0.0, root * root - delta)));
}

// General n-mode form. With
// V_aux = O^T (s1 + s2)^-1 (O / 4 + s2 O s1) and +-i x_k the eigenvalues of
// V_aux O, the determinant expression for the fidelity reduces to
// F = prod_k 2 (x_k + sqrt(x_k^2 - 1/4)) / sqrt(det(s1 + s2)).
// Working with the x_k avoids choosing matrix square-root branches.
inline double fidelity_general(const Matrix& s1, const Matrix& s2) {
  const auto n = static_cast<std::size_t>(s1.rows() / 2);
  const Matrix omega = symplectic_form(n);
  const Matrix sum = s1 + s2;
  const Matrix v_aux = omega.transpose() * sum.inverse() * (0.25 * omega + s2 * omega * s1);
  Eigen::EigenSolver<Matrix> es(v_aux * omega, false);
  if (es.info() != Eigen::Success) throw NumericalError("fidelity: eigen-decomposition failed");
  std::vector<double> x;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) x.push_back(std::abs(es.eigenvalues()(i).imag()));
  std::sort(x.begin(), x.end());
  double f = 1.0 / std::sqrt(sum.determinant());
  for (std::size_t k = 0; k < n; ++k) {
    const double xk = 0.5 * (x[2 * k] + x[2 * k + 1]);
    f *= 2.0 * (xk + std::sqrt(std::max(0.0, xk * xk - 0.25)));
  }
  return f;
}

inline bool is_pure(const Matrix& s) {
  return std::abs(std::pow(4.0, static_cast<double>(s.rows() / 2)) * s.determinant() - 1.0) < 1e-12;
}

}  // namespace detail

enum class FidelityMethod { automatic, general };

/// Gaussian Uhlmann fidelity. Single- and two-mode states use closed forms;
/// larger states (or method == general) use the n-mode expression, with
/// the exact overlap formula when either state is pure.
inline double fidelity(const GaussianState& a, const GaussianState& b, FidelityMethod method = FidelityMethod::automatic) {
  if (a.n_modes() != b.n_modes()) throw std::invalid_argument("fidelity: mode count mismatch");
  require_physical(a, "fidelity");
  require_physical(b, "fidelity");
  const Matrix& s1 = a.cov();
  const Matrix& s2 = b.cov();
  if (method == FidelityMethod::general) return detail::clamp_unit(detail::fidelity_general(s1, s2));
  if (a.n_modes() > 2 && (detail::is_pure(s1) || detail::is_pure(s2))) {
    return detail::clamp_unit(1.0 / std::sqrt((s1 + s2).determinant()));
  }
  switch (a.n_modes()) {
    case 1:
      return detail::clamp_unit(detail::fidelity_single_mode(s1, s2));
    case 2:
      return detail::clamp_unit(detail::fidelity_two_mode(s1, s2));
    default:
      return detail::clamp_unit(detail::fidelity_general(s1, s2));
  }
}

/// Overlap <psi|rho|psi> when `pure` is a pure state: 1 / sqrt(det(s1 + s2)).
inline double fidelity_with_pure(const GaussianState& pure, const GaussianState& other) {
  if (pure.n_modes() != other.n_modes()) throw std::invalid_argument("fidelity_with_pure: mode count mismatch");
  return detail::clamp_unit(1.0 / std::sqrt((pure.cov() + other.cov()).determinant()));
}

}  // namespace mechcluster::gaussian
