#pragma once

// Zero-mean Gaussian states in the covariance-matrix picture.
//
// Conventions: quadrature ordering (q1, p1, ..., qn, pn), hbar = 1, vacuum
// covariance I/2. First moments are never tracked; every displacement the
// protocols produce is a known by-product and drops out at this level.

#include "mechcluster/linalg.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mechcluster::gaussian {

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kPhysicalTolerance = 1e-9;
inline constexpr double kSymplecticTolerance = 1e-10;

/// Converts a squeezing level in dB to the squeezing parameter r,
/// so that the squeezed variance is 10^(-dB/10) times the vacuum one.
inline double db_to_r(double db) { return db * std::log(10.0) / 20.0; }

class GaussianState {
 public:
  /// Takes ownership of a covariance matrix. Checks shape and symmetry
  /// (relative 1e-10) and stores the symmetrized matrix. Physicality is a
  /// separate question answered by check_physical().
  explicit GaussianState(Matrix cov) : cov_(std::move(cov)) {
    if (cov_.rows() == 0 || cov_.rows() != cov_.cols() || cov_.rows() % 2 != 0) {
      throw std::invalid_argument("GaussianState: covariance must be a non-empty 2n x 2n matrix");
    }
    if (!cov_.allFinite()) {
      throw std::invalid_argument("GaussianState: covariance has non-finite entries");
    }
    const double scale = std::max(1.0, max_abs(cov_));
    if (max_abs(cov_ - cov_.transpose()) > kSymmetryTolerance * scale) {
      throw std::invalid_argument("GaussianState: covariance is not symmetric");
    }
    cov_ = symmetrized(cov_);
  }

  [[nodiscard]] std::size_t n_modes() const { return static_cast<std::size_t>(cov_.rows() / 2); }
  [[nodiscard]] const Matrix& cov() const { return cov_; }

  /// 2x2 block of mode j.
  [[nodiscard]] Matrix2 mode_block(std::size_t j) const {
    const auto i = static_cast<Eigen::Index>(2 * j);
    return cov_.block<2, 2>(i, i);
  }

  friend bool operator==(const GaussianState&, const GaussianState&) = default;

 private:
  Matrix cov_;
};

/// Measurement angle of the quadrature X_phi = q cos(phi) + p sin(phi),
/// normalised to (-pi, pi].
class QuadratureAngle {
 public:
  constexpr QuadratureAngle() = default;
  explicit QuadratureAngle(double radians) : phi_(normalise(radians)) {}

  [[nodiscard]] double radians() const { return phi_; }

  static QuadratureAngle position() { return QuadratureAngle(0.0); }
  static QuadratureAngle momentum() { return QuadratureAngle(kPi / 2); }

 private:
  static double normalise(double a) {
    double r = std::remainder(a, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
  }
  double phi_ = 0.0;
};

/// A real linear phase-space map satisfying M Omega M^T = Omega.
class SymplecticMatrix {
 public:
  explicit SymplecticMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() == 0 || m_.rows() != m_.cols() || m_.rows() % 2 != 0) {
      throw std::invalid_argument("SymplecticMatrix: must be a non-empty 2n x 2n matrix");
    }
    if (const double err = symplectic_defect(m_); err > kSymplecticTolerance * std::max(1.0, max_abs(m_) * max_abs(m_))) {
      throw std::invalid_argument("SymplecticMatrix: M Omega M^T != Omega (defect " + std::to_string(err) + ")");
    }
  }

  static SymplecticMatrix identity(std::size_t n_modes) {
    return SymplecticMatrix(Matrix::Identity(2 * n_modes, 2 * n_modes));
  }

  /// max |M Omega M^T - Omega|
  static double symplectic_defect(const Matrix& m) {
    const Matrix omega = symplectic_form(static_cast<std::size_t>(m.rows() / 2));
    return max_abs(m * omega * m.transpose() - omega);
  }

  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  [[nodiscard]] const Matrix& matrix() const { return m_; }

  friend SymplecticMatrix operator*(const SymplecticMatrix& a, const SymplecticMatrix& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("SymplecticMatrix: dimension mismatch");
    return SymplecticMatrix(a.m_ * b.m_);
  }

 private:
  Matrix m_;
};

struct Edge {
  std::size_t j = 0;
  std::size_t k = 0;
  double weight = 1.0;
};

/// Weighted simple graph describing a cluster's CZ pattern.
struct GraphSpec {
  std::size_t n_nodes = 0;
  std::vector<Edge> edges;

  void validate() const {
    if (n_nodes == 0) throw std::invalid_argument("GraphSpec: no nodes");
    for (const auto& e : edges) {
      if (e.j >= n_nodes || e.k >= n_nodes) throw std::invalid_argument("GraphSpec: edge endpoint out of range");
      if (e.j == e.k) throw std::invalid_argument("GraphSpec: self-loop");
      if (!std::isfinite(e.weight)) throw std::invalid_argument("GraphSpec: non-finite weight");
    }
  }

  static GraphSpec linear(std::size_t n, double weight = 1.0) {
    GraphSpec g{n, {}};
    for (std::size_t j = 0; j + 1 < n; ++j) g.edges.push_back({j, j + 1, weight});
    return g;
  }

  [[nodiscard]] std::vector<std::pair<std::size_t, double>> neighbours(std::size_t node) const {
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& e : edges) {
      if (e.j == node) out.emplace_back(e.k, e.weight);
      if (e.k == node) out.emplace_back(e.j, e.weight);
    }
    return out;
  }
};

struct PhysicalityReport {
  bool physical = false;
  double min_symplectic_eigenvalue = 0.0;
};

// ---------------------------------------------------------------------------
// Construction

inline GaussianState vacuum(std::size_t n_modes) {
  if (n_modes == 0) throw std::invalid_argument("vacuum: mode count must be positive");
  return GaussianState(0.5 * Matrix::Identity(2 * n_modes, 2 * n_modes));
}

/// Product of thermal states with mean occupancy n on every mode.
inline GaussianState thermal(std::size_t n_modes, double occupancy) {
  if (n_modes == 0) throw std::invalid_argument("thermal: mode count must be positive");
  if (occupancy < 0.0) throw std::invalid_argument("thermal: negative occupancy");
  return GaussianState((occupancy + 0.5) * Matrix::Identity(2 * n_modes, 2 * n_modes));
}

inline GaussianState tensor(const GaussianState& a, const GaussianState& b) {
  return GaussianState(direct_sum(a.cov(), b.cov()));
}

// ---------------------------------------------------------------------------
// Symplectic evolution

inline GaussianState apply(const GaussianState& state, const SymplecticMatrix& s) {
  if (s.dim() != 2 * state.n_modes()) throw std::invalid_argument("apply: dimension mismatch");
  return GaussianState(s.matrix() * state.cov() * s.matrix().transpose());
}

/// Applies a 2x2 map to one mode; the remaining modes see the identity.
inline GaussianState apply_local(const GaussianState& state, std::size_t mode, const Matrix2& s) {
  if (mode >= state.n_modes()) throw std::out_of_range("apply_local: invalid mode index");
  Matrix full = Matrix::Identity(static_cast<Eigen::Index>(2 * state.n_modes()),
                                 static_cast<Eigen::Index>(2 * state.n_modes()));
  const auto i = static_cast<Eigen::Index>(2 * mode);
  full.block<2, 2>(i, i) = s;
  return apply(state, SymplecticMatrix(std::move(full)));
}

/// Momentum squeezing diag(e^r, e^-r) on one mode, r from dB.
inline GaussianState squeeze_momentum(const GaussianState& state, std::size_t mode, double r_db) {
  if (mode >= state.n_modes()) throw std::out_of_range("squeeze_momentum: invalid mode index");
  if (!(r_db >= 0.0)) throw std::invalid_argument("squeeze_momentum: squeezing must be non-negative");
  const double r = db_to_r(r_db);
  Matrix2 s = Matrix2::Zero();
  s(0, 0) = std::exp(r);
  s(1, 1) = std::exp(-r);
  return apply_local(state, mode, s);
}

inline GaussianState rotate(const GaussianState& state, std::size_t mode, double phi) {
  return apply_local(state, mode, rotation(phi));
}

/// Symplectic matrix of CZ_jk = exp(i w q_j q_k): p_j += w q_k, p_k += w q_j.
inline SymplecticMatrix cz_symplectic(std::size_t n_modes, std::size_t j, std::size_t k, double weight = 1.0) {
  if (j == k) throw std::invalid_argument("apply_cz: j == k");
  if (j >= n_modes || k >= n_modes) throw std::out_of_range("apply_cz: invalid mode index");
  Matrix s = Matrix::Identity(static_cast<Eigen::Index>(2 * n_modes), static_cast<Eigen::Index>(2 * n_modes));
  s(static_cast<Eigen::Index>(2 * j + 1), static_cast<Eigen::Index>(2 * k)) = weight;
  s(static_cast<Eigen::Index>(2 * k + 1), static_cast<Eigen::Index>(2 * j)) = weight;
  return SymplecticMatrix(std::move(s));
}

inline GaussianState apply_cz(const GaussianState& state, std::size_t j, std::size_t k, double weight = 1.0) {
  return apply(state, cz_symplectic(state.n_modes(), j, k, weight));
}

/// Momentum-squeezed vacua on every node, then one CZ per edge.
inline GaussianState build_cluster(const GraphSpec& graph, double r_cluster_db) {
  graph.validate();
  GaussianState state = vacuum(graph.n_nodes);
  for (std::size_t j = 0; j < graph.n_nodes; ++j) state = squeeze_momentum(state, j, r_cluster_db);
  for (const auto& e : graph.edges) state = apply_cz(state, e.j, e.k, e.weight);
  return state;
}

/// Var(p_j - sum_k w_jk q_k) for every node: the graph-state nullifiers.
inline std::vector<double> nullifier_variances(const GaussianState& state, const GraphSpec& graph) {
  graph.validate();
  if (graph.n_nodes != state.n_modes()) throw std::invalid_argument("nullifier_variances: size mismatch");
  std::vector<double> out;
  out.reserve(graph.n_nodes);
  for (std::size_t j = 0; j < graph.n_nodes; ++j) {
    Vector c = Vector::Zero(static_cast<Eigen::Index>(2 * graph.n_nodes));
    c(static_cast<Eigen::Index>(2 * j + 1)) = 1.0;
    for (auto [k, w] : graph.neighbours(j)) c(static_cast<Eigen::Index>(2 * k)) -= w;
    out.push_back(c.dot(state.cov() * c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Symplectic eigenvalues in ascending order (one per mode).
inline std::vector<double> symplectic_eigenvalues(const GaussianState& state) {
  const Matrix& cov = state.cov();
  const Matrix omega = symplectic_form(state.n_modes());
  Vector nu2;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) {
    // L^T Omega^T cov Omega L is symmetric and shares its spectrum with -(Omega cov)^2.
    const Matrix l = llt.matrixL();
    const Matrix m = l.transpose() * omega.transpose() * cov * omega * l;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
    nu2 = es.eigenvalues();
  } else {
    Eigen::EigenSolver<Matrix> es(omega * cov, false);
    nu2 = es.eigenvalues().imag().cwiseAbs2();
    std::sort(nu2.data(), nu2.data() + nu2.size());
  }
  std::vector<double> nu;
  nu.reserve(state.n_modes());
  // Each value appears twice; take every other one.
  for (Eigen::Index i = 0; i + 1 < nu2.size(); i += 2) {
    nu.push_back(std::sqrt(std::max(0.0, 0.5 * (nu2(i) + nu2(i + 1)))));
  }
  return nu;
}

inline PhysicalityReport check_physical(const GaussianState& state, double tolerance = kPhysicalTolerance) {
  const auto nu = symplectic_eigenvalues(state);
  const double min_nu = *std::min_element(nu.begin(), nu.end());
  // Symplectic eigenvalues >= 1/2 alone do not exclude indefinite matrices.
  Eigen::SelfAdjointEigenSolver<Matrix> es(state.cov(), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const bool positive = lo > 0.0;
  // Round-off in the symplectic spectrum grows with the condition number,
  // which is ~e^{4r} for strongly squeezed states.
  const double slack = positive ? 100.0 * std::numeric_limits<double>::epsilon() * es.eigenvalues().maxCoeff() / lo : 0.0;
  return {positive && min_nu >= 0.5 - tolerance - slack, min_nu};
}

inline void require_physical(const GaussianState& state, const char* where) {
  const auto report = check_physical(state);
  if (!report.physical) {
    throw std::invalid_argument(std::string(where) + ": non-physical state (min symplectic eigenvalue " +
                                std::to_string(report.min_symplectic_eigenvalue) + ")");
  }
}

/// Purity tr(rho^2) = 1 / (2^n sqrt(det cov)).
inline double purity(const GaussianState& state) {
  return 1.0 / (std::pow(2.0, static_cast<double>(state.n_modes())) * std::sqrt(state.cov().determinant()));
}

// ---------------------------------------------------------------------------
// Reduction and measurement

inline GaussianState partial_trace(const GaussianState& state, std::span<const std::size_t> keep) {
  if (keep.empty()) throw std::invalid_argument("partial_trace: empty keep-set");
  for (auto m : keep) {
    if (m >= state.n_modes()) throw std::out_of_range("partial_trace: invalid mode index");
  }
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (std::find(keep.begin() + static_cast<std::ptrdiff_t>(i) + 1, keep.end(), keep[i]) != keep.end()) {
      throw std::invalid_argument("partial_trace: mode listed twice");
    }
  }
  const auto idx = quadrature_indices(keep);
  return GaussianState(select(state.cov(), idx, idx));
}

inline GaussianState partial_trace(const GaussianState& state, std::initializer_list<std::size_t> keep) {
  return partial_trace(state, std::span<const std::size_t>(keep.begin(), keep.size()));
}

/// Ideal homodyne detection of X_phi on `mode`. The measured mode is removed
/// and the remaining modes keep their relative order. Outcome independent.
inline GaussianState homodyne_project(const GaussianState& state, std::size_t mode, QuadratureAngle angle) {
  if (mode >= state.n_modes()) throw std::out_of_range("homodyne_project: invalid mode index");
  if (state.n_modes() < 2) throw std::invalid_argument("homodyne_project: nothing left after measuring");
  require_physical(state, "homodyne_project");

  const GaussianState rotated = rotate(state, mode, angle.radians());
  std::vector<std::size_t> rest;
  for (std::size_t m = 0; m < state.n_modes(); ++m) {
    if (m != mode) rest.push_back(m);
  }
  const auto a_idx = quadrature_indices(rest);
  const std::size_t measured[] = {mode};
  const auto b_idx = quadrature_indices(measured);

  const Matrix sigma_a = select(rotated.cov(), a_idx, a_idx);
  const Matrix sigma_ab = select(rotated.cov(), a_idx, b_idx);
  Matrix projected = select(rotated.cov(), b_idx, b_idx);
  // Pi sigma_B Pi with Pi = diag(1, 0).
  projected(0, 1) = projected(1, 0) = projected(1, 1) = 0.0;
  const Matrix update = sigma_ab * pseudo_inverse(projected) * sigma_ab.transpose();
  return GaussianState(symmetrized(sigma_a - update));
}

/// Measures several modes (in the order given) and returns the state of the
/// unmeasured modes in their original relative order.
inline GaussianState homodyne_project_many(GaussianState state,
                                           std::span<const std::pair<std::size_t, QuadratureAngle>> measurements) {
  std::vector<std::size_t> alive(state.n_modes());
  for (std::size_t m = 0; m < alive.size(); ++m) alive[m] = m;
  for (const auto& [mode, angle] : measurements) {
    auto it = std::find(alive.begin(), alive.end(), mode);
    if (it == alive.end()) throw std::invalid_argument("homodyne_project_many: mode measured twice or out of range");
    const auto pos = static_cast<std::size_t>(it - alive.begin());
    state = homodyne_project(state, pos, angle);
    alive.erase(it);
  }
  return state;
}

}  // namespace mechcluster::gaussian
