#pragma once

// Deterministic covariance dynamics of a Gaussian system coupled to Markovian
// input modes, some of which are continuously homodyned:
//
//   d sigma / dt = A sigma + sigma A^T + D - sigma B B^T sigma
//
// Dissipative channels contribute Lyapunov terms, monitored channels Riccati
// terms, and the coefficients of both are summed before integration.

#include "mechcluster/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mechcluster::dynamics {

using gaussian::GaussianState;

/// Partitioned system-bath coupling. Matrices are in quadrature form:
/// monitored is 2n x 2m_m, dissipative 2n x 2m_d, hamiltonian 2n x 2n with
/// H_s = r^T hamiltonian r / 2.
struct CouplingSpec {
  Matrix monitored;
  Matrix dissipative;
  Matrix hamiltonian;

  void validate() const {
    const Eigen::Index dim = hamiltonian.rows();
    if (dim == 0 || dim % 2 != 0 || hamiltonian.cols() != dim) {
      throw std::invalid_argument("CouplingSpec: hamiltonian must be 2n x 2n");
    }
    if (max_abs(hamiltonian - hamiltonian.transpose()) > 1e-12 * std::max(1.0, max_abs(hamiltonian))) {
      throw std::invalid_argument("CouplingSpec: hamiltonian must be symmetric");
    }
    if (monitored.size() > 0 && (monitored.rows() != dim || monitored.cols() % 2 != 0)) {
      throw std::invalid_argument("CouplingSpec: monitored coupling has wrong shape");
    }
    if (dissipative.size() > 0 && (dissipative.rows() != dim || dissipative.cols() % 2 != 0)) {
      throw std::invalid_argument("CouplingSpec: dissipative coupling has wrong shape");
    }
  }
};

/// Input-mode states. dissipative is block diagonal over the dissipative
/// channels; monitored is the input state of the homodyned channels and
/// post_measurement the state they are projected onto (before efficiency).
struct BathSpec {
  Matrix dissipative;
  Matrix monitored;
  Matrix post_measurement;
  double efficiency = 1.0;

  /// Post-measurement covariance of an ideal homodyne of the input's position:
  /// diag(e^-2r, e^2r) / 2.
  static Matrix homodyne_post_measurement(double r_post_meas_db) {
    const double r = gaussian::db_to_r(r_post_meas_db);
    Matrix s = Matrix::Zero(2, 2);
    s(0, 0) = 0.5 * std::exp(-2.0 * r);
    s(1, 1) = 0.5 * std::exp(2.0 * r);
    return s;
  }
};

struct DriftDiffusion {
  Matrix drift;
  Matrix diffusion;
};

struct RiccatiCoefficients {
  Matrix drift;
  Matrix diffusion;
  Matrix backaction;  // B
};

struct EvolutionCoefficients {
  Matrix drift;       // A_total
  Matrix diffusion;   // D_total
  Matrix backaction;  // B, 2n x 2m_m (zero columns when nothing is monitored)

  [[nodiscard]] Eigen::Index dim() const { return drift.rows(); }

  /// B B^T, cached by callers that step repeatedly.
  [[nodiscard]] Matrix gain() const {
    return backaction.size() == 0 ? Matrix::Zero(drift.rows(), drift.cols()) : Matrix(backaction * backaction.transpose());
  }

  friend EvolutionCoefficients operator+(const EvolutionCoefficients& a, const EvolutionCoefficients& b) {
    if (a.backaction.size() > 0 && b.backaction.size() > 0) {
      throw std::invalid_argument("EvolutionCoefficients: cannot add two monitored parts");
    }
    return {a.drift + b.drift, a.diffusion + b.diffusion, a.backaction.size() > 0 ? a.backaction : b.backaction};
  }
};

// ---------------------------------------------------------------------------
// Coefficient builders

/// A = Omega C Omega C^T / 2, D = Omega C sigma_B C^T Omega^T.
inline DriftDiffusion build_lyapunov(const Matrix& coupling, const Matrix& bath) {
  if (coupling.rows() % 2 != 0 || coupling.cols() % 2 != 0) {
    throw std::invalid_argument("build_lyapunov: coupling must be 2n x 2m");
  }
  if (bath.rows() != coupling.cols() || bath.cols() != coupling.cols()) {
    throw std::invalid_argument("build_lyapunov: bath covariance does not match coupling");
  }
  const Matrix omega_s = symplectic_form(static_cast<std::size_t>(coupling.rows() / 2));
  const Matrix omega_b = symplectic_form(static_cast<std::size_t>(coupling.cols() / 2));
  DriftDiffusion out;
  out.drift = 0.5 * omega_s * coupling * omega_b * coupling.transpose();
  out.diffusion = symmetrized(omega_s * coupling * bath * coupling.transpose() * omega_s.transpose());
  return out;
}

/// A -> A + Omega H_s.
inline Matrix add_system_hamiltonian(const Matrix& drift, const Matrix& hamiltonian) {
  if (drift.rows() != hamiltonian.rows() || drift.cols() != hamiltonian.cols()) {
    throw std::invalid_argument("add_system_hamiltonian: dimension mismatch");
  }
  return drift + symplectic_form(static_cast<std::size_t>(drift.rows() / 2)) * hamiltonian;
}

/// sigma_m -> sigma_m / eta + (1 - eta) / eta I.
inline Matrix apply_inefficiency(const Matrix& post_measurement, double efficiency) {
  if (!(efficiency > 0.0 && efficiency <= 1.0)) {
    throw std::invalid_argument("apply_inefficiency: efficiency must lie in (0, 1]");
  }
  return post_measurement / efficiency +
         (1.0 - efficiency) / efficiency * Matrix::Identity(post_measurement.rows(), post_measurement.cols());
}

/// Riccati coefficients of continuously homodyned channels:
///   A~ = A - Omega C sigma_B W Omega C^T
///   D~ = D + Omega C sigma_B W sigma_B C^T Omega
///   B  = C Omega sqrt(W),     W = (sigma_B + sigma_m)^-1
/// with sigma_m first distorted by the detector efficiency.
inline RiccatiCoefficients build_riccati(const Matrix& coupling, const Matrix& bath, const Matrix& post_measurement,
                                         double efficiency) {
  const DriftDiffusion base = build_lyapunov(coupling, bath);
  if (post_measurement.rows() != bath.rows() || post_measurement.cols() != bath.cols()) {
    throw std::invalid_argument("build_riccati: post-measurement covariance does not match bath");
  }
  const Matrix sigma_m = apply_inefficiency(post_measurement, efficiency);
  const Matrix total = symmetrized(bath + sigma_m);
  Eigen::LLT<Matrix> llt(total);
  if (llt.info() != Eigen::Success || std::abs(total.determinant()) < 1e-300) {
    throw NumericalError("build_riccati: sigma_B + sigma_m is singular");
  }
  const Matrix w = symmetrized(llt.solve(Matrix::Identity(total.rows(), total.cols())));
  const Matrix omega_s = symplectic_form(static_cast<std::size_t>(coupling.rows() / 2));
  const Matrix omega_b = symplectic_form(static_cast<std::size_t>(coupling.cols() / 2));

  RiccatiCoefficients out;
  out.drift = base.drift - omega_s * coupling * bath * w * omega_b * coupling.transpose();
  out.diffusion = symmetrized(base.diffusion + omega_s * coupling * bath * w * bath * coupling.transpose() * omega_s);
  out.backaction = coupling * omega_b * spd_sqrt(w);
  return out;
}

/// Sums the dissipative (Lyapunov), monitored (Riccati) and Hamiltonian parts.
inline EvolutionCoefficients assemble(const CouplingSpec& coupling, const BathSpec& bath) {
  coupling.validate();
  const Eigen::Index dim = coupling.hamiltonian.rows();
  EvolutionCoefficients out{Matrix::Zero(dim, dim), Matrix::Zero(dim, dim), Matrix::Zero(dim, 0)};
  if (coupling.dissipative.size() > 0) {
    const auto lyap = build_lyapunov(coupling.dissipative, bath.dissipative);
    out.drift += lyap.drift;
    out.diffusion += lyap.diffusion;
  }
  if (coupling.monitored.size() > 0) {
    const auto ricc = build_riccati(coupling.monitored, bath.monitored, bath.post_measurement, bath.efficiency);
    out.drift += ricc.drift;
    out.diffusion += ricc.diffusion;
    out.backaction = ricc.backaction;
  }
  out.drift = add_system_hamiltonian(out.drift, coupling.hamiltonian);
  return out;
}

// ---------------------------------------------------------------------------
// Integration

/// Right-hand side A s + s A^T + D - s G s with G = B B^T.
inline Matrix riccati_rhs(const Matrix& sigma, const Matrix& drift, const Matrix& diffusion, const Matrix& gain) {
  const Matrix as = drift * sigma;
  return as + as.transpose() + diffusion - sigma * gain * sigma;
}

/// Fixed-step RK4 stepper holding the coefficients and B B^T.
class RiccatiStepper {
 public:
  explicit RiccatiStepper(EvolutionCoefficients coeffs)
      : coeffs_(std::move(coeffs)), gain_(coeffs_.gain()) {}

  [[nodiscard]] const EvolutionCoefficients& coefficients() const { return coeffs_; }

  /// One RK4 step followed by symmetrization.
  void step(Matrix& sigma, double dt) const {
    const Matrix k1 = rhs(sigma);
    const Matrix k2 = rhs(sigma + 0.5 * dt * k1);
    const Matrix k3 = rhs(sigma + 0.5 * dt * k2);
    const Matrix k4 = rhs(sigma + dt * k3);
    sigma += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    sigma = symmetrized(sigma);
  }

  [[nodiscard]] Matrix rhs(const Matrix& sigma) const {
    if (coeffs_.backaction.cols() * 2 < coeffs_.backaction.rows()) {
      // Low-rank B: sigma B B^T sigma = (sigma B)(sigma B)^T.
      const Matrix as = coeffs_.drift * sigma;
      const Matrix sb = sigma * coeffs_.backaction;
      return as + as.transpose() + coeffs_.diffusion - sb * sb.transpose();
    }
    return riccati_rhs(sigma, coeffs_.drift, coeffs_.diffusion, gain_);
  }

 private:
  EvolutionCoefficients coeffs_;
  Matrix gain_;
};

struct IntegratorOptions {
  std::size_t check_every = 100;   // physicality check period in steps
  std::size_t sample_every = 1;    // trajectory sampling period in steps
  double physical_tolerance = 1e-6;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<GaussianState> states;

  [[nodiscard]] const GaussianState& final_state() const { return states.back(); }
};

inline void check_trajectory_point(const Matrix& sigma, double t, double tolerance) {
  if (!sigma.allFinite()) throw NumericalError("integrate: covariance diverged at t = " + std::to_string(t));
  const auto report = gaussian::check_physical(GaussianState(sigma), tolerance);
  if (!report.physical) {
    throw NumericalError("integrate: physicality lost at t = " + std::to_string(t) + " (min symplectic eigenvalue " +
                         std::to_string(report.min_symplectic_eigenvalue) + "); reduce dt");
  }
}

/// Number of equal RK4 substeps covering `duration` with steps no longer than max_dt.
inline std::size_t substeps_for(double duration, double max_dt) {
  if (!(max_dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (duration <= 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(duration / max_dt - 1e-9));
}

/// Integrates from sigma0 over [0, t_total] with steps of at most dt. The last
/// step is shortened so the trajectory ends exactly at t_total.
inline Trajectory integrate(const GaussianState& sigma0, const EvolutionCoefficients& coeffs, double t_total, double dt,
                            const IntegratorOptions& options = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  if (t_total < 0.0) throw std::invalid_argument("integrate: negative duration");
  if (static_cast<Eigen::Index>(2 * sigma0.n_modes()) != coeffs.dim()) {
    throw std::invalid_argument("integrate: state and coefficients differ in dimension");
  }
  gaussian::require_physical(sigma0, "integrate");

  const RiccatiStepper stepper(coeffs);
  const std::size_t n = substeps_for(t_total, dt);
  const double h = n > 0 ? t_total / static_cast<double>(n) : 0.0;
  const std::size_t sample_every = std::max<std::size_t>(1, options.sample_every);
  const std::size_t check_every = std::max<std::size_t>(1, options.check_every);

  Trajectory out;
  Matrix sigma = sigma0.cov();
  out.times.push_back(0.0);
  out.states.push_back(sigma0);
  for (std::size_t i = 1; i <= n; ++i) {
    stepper.step(sigma, h);
    const double t = static_cast<double>(i) * h;
    if (i % check_every == 0 || i == n) check_trajectory_point(sigma, t, options.physical_tolerance);
    if (i % sample_every == 0 || i == n) {
      out.times.push_back(t);
      out.states.emplace_back(sigma);
    }
  }
  return out;
}

/// Largest real part among the eigenvalues of A.
inline double spectral_abscissa(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

/// Solves A X + X A^T + D = 0 through the Kronecker form.
inline Matrix solve_lyapunov(const Matrix& a, const Matrix& d) {
  const Eigen::Index n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  Matrix big = Matrix::Zero(n * n, n * n);
  // vec(A X) = (I (x) A) vec X, vec(X A^T) = (A (x) I) vec X.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      big.block(i * n, j * n, n, n) += id(i, j) * a + a(i, j) * id;
    }
  }
  const Vector rhs = -Eigen::Map<const Vector>(d.data(), n * n);
  const Vector x = big.partialPivLu().solve(rhs);
  return symmetrized(Eigen::Map<const Matrix>(x.data(), n, n));
}

struct SteadyStateOptions {
  double residual_tolerance = 1e-10;
  double max_time = 0.0;  // 0: derived from the slowest relaxation rate
};

/// Stationary covariance. Without monitoring the Lyapunov equation is solved
/// directly (A must be Hurwitz); with monitoring the Riccati equation is
/// integrated until its right-hand side vanishes.
inline GaussianState steady_state(const EvolutionCoefficients& coeffs, const SteadyStateOptions& options = {}) {
  const double abscissa = spectral_abscissa(coeffs.drift);
  const bool monitored = coeffs.backaction.size() > 0 && max_abs(coeffs.backaction) > 0.0;
  if (!monitored) {
    if (!(abscissa < 0.0)) throw NumericalError("steady_state: drift matrix is not Hurwitz");
    GaussianState out(solve_lyapunov(coeffs.drift, coeffs.diffusion));
    const Matrix& x = out.cov();
    const Matrix res = coeffs.drift * x + x * coeffs.drift.transpose() + coeffs.diffusion;
    if (max_abs(res) > options.residual_tolerance * std::max(1.0, max_abs(coeffs.diffusion))) {
      throw NumericalError("steady_state: Lyapunov residual too large");
    }
    return out;
  }

  // Rate scale for the step size and the default horizon.
  Eigen::EigenSolver<Matrix> es(coeffs.drift, false);
  const double fastest = std::max({es.eigenvalues().cwiseAbs().maxCoeff(), max_abs(coeffs.gain()), 1e-300});
  const double slowest = abscissa < 0.0 ? -abscissa : 0.0;
  const double dt = 1.0 / (20.0 * fastest);
  const double horizon =
      options.max_time > 0.0 ? options.max_time : 200.0 / std::max(slowest, fastest * 1e-6);
  const RiccatiStepper stepper(coeffs);
  Matrix sigma = 0.5 * Matrix::Identity(coeffs.dim(), coeffs.dim());
  const double scale = std::max(1.0, max_abs(coeffs.diffusion));
  for (double t = 0.0; t < horizon; t += dt) {
    stepper.step(sigma, dt);
    if (!sigma.allFinite()) throw NumericalError("steady_state: Riccati iteration diverged");
    if (max_abs(stepper.rhs(sigma)) < options.residual_tolerance * scale) return GaussianState(sigma);
  }
  throw NumericalError("steady_state: no convergence within the integration horizon");
}

/// Columnar export: time, the upper triangle of the covariance, then the
/// minimum symplectic eigenvalue and purity.
inline void write_trajectory(std::ostream& os, const Trajectory& traj) {
  if (traj.states.empty()) return;
  const Eigen::Index dim = traj.states.front().cov().rows();
  os << "time";
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i; j < dim; ++j) os << ",s" << i << '_' << j;
  }
  os << ",min_symplectic_eigenvalue,purity\n";
  os.precision(17);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const Matrix& s = traj.states[k].cov();
    os << traj.times[k];
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = i; j < dim; ++j) os << ',' << s(i, j);
    }
    os << ',' << gaussian::check_physical(traj.states[k]).min_symplectic_eigenvalue << ','
       << gaussian::purity(traj.states[k]) << '\n';
  }
}

}  // namespace mechcluster::dynamics
