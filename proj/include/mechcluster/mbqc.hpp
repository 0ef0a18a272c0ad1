#pragma once

// Gate programs for continuous-variable MBQC and the ideal projective oracle.
//
// A single-mode program is four shear parameters {l1, l2, l3, l4}; measuring
// p + l q on a node teleports F S(l) onto its neighbour, so four steps along
// a five-node wire implement f s(l4) f s(l3) f s(l2) f s(l1). The two-mode
// program is the CZ gate on a minimal dual rail.

#include "mechcluster/fidelity.hpp"
#include "mechcluster/gaussian.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace mechcluster::mbqc {

using gaussian::GaussianState;
using gaussian::QuadratureAngle;
using gaussian::SymplecticMatrix;

using Lambdas = std::array<double, 4>;

class DecompositionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Matrix2 fourier_matrix() {
  Matrix2 f;
  f << 0.0, -1.0, 1.0, 0.0;
  return f;
}

inline Matrix2 shear_matrix(double lambda) {
  Matrix2 s;
  s << 1.0, 0.0, lambda, 1.0;
  return s;
}

/// Closed form of f s(l4) f s(l3) f s(l2) f s(l1).
inline SymplecticMatrix lambdas_to_symplectic(const Lambdas& l) {
  const auto [l1, l2, l3, l4] = l;
  Matrix m(2, 2);
  m(0, 0) = l4 * l3 * (l2 * l1 - 1.0) - l1 * (l2 + l4) + 1.0;
  m(0, 1) = l4 * l3 * l2 - l4 - l2;
  m(1, 0) = -l3 * l2 * l1 + l3 + l1;
  m(1, 1) = -l3 * l2 + 1.0;
  return SymplecticMatrix(std::move(m));
}

/// The same map assembled from the four teleportation steps.
inline SymplecticMatrix compose_oracle(const Lambdas& l) {
  Matrix2 m = Matrix2::Identity();
  for (double lambda : l) m = fourier_matrix() * shear_matrix(lambda) * m;
  return SymplecticMatrix(Matrix(m));
}

/// Driving phase for the measurement p + l q: phi = arctan(1 / l), pi/2 at l = 0.
inline QuadratureAngle lambda_to_phase(double lambda) {
  if (lambda == 0.0) return QuadratureAngle::momentum();
  return QuadratureAngle(std::atan(1.0 / lambda));
}

// ---------------------------------------------------------------------------
// Gates and programs

struct Identity {};
struct Fourier {};
struct Shear {
  double lambda = 0.0;
};
struct ExplicitGate {
  SymplecticMatrix target;
};
using SingleModeGate = std::variant<Identity, Fourier, Shear, ExplicitGate>;

struct SingleModeProgram {
  Lambdas lambdas{};
};
struct CzProgram {
  double weight = 1.0;
};
using GateProgram = std::variant<SingleModeProgram, CzProgram>;

/// Solves the closed form for one choice of {l1..l4} reproducing a 2x2
/// symplectic target [[a, b], [c, d]]. One parameter is free; l1 = 0 is used
/// whenever the remaining system is regular.
inline Lambdas gate_to_lambdas(const SymplecticMatrix& target) {
  if (target.dim() != 2) throw std::invalid_argument("gate_to_lambdas: target must be 2x2");
  const Matrix& m = target.matrix();
  const double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
  constexpr double eps = 1e-12;
  Lambdas l{};
  if (std::abs(d) < eps) {
    // l2 l3 = 1: bottom-right vanishes, det = 1 forces b c = -1.
    if (std::abs(b) < eps) throw DecompositionError("gate_to_lambdas: decomposition singular");
    l[1] = -b;
    l[2] = 1.0 / l[1];
    l[0] = 0.0;
    l[3] = (1.0 - a) / l[2];
  } else if (std::abs(d - 1.0) < eps) {
    l = {0.0, 0.0, c, -b};
  } else {
    l[0] = std::abs(c) > eps ? 0.0 : -1.0 / d;
    l[2] = c - l[0] * d;
    l[1] = (1.0 - d) / l[2];
    l[3] = -(b + l[1]) / d;
  }
  const double err = max_abs(lambdas_to_symplectic(l).matrix() - m);
  if (!(err < 1e-9 * std::max(1.0, max_abs(m)))) {
    throw DecompositionError("gate_to_lambdas: decomposition singular (residual " + std::to_string(err) + ")");
  }
  return l;
}

inline Lambdas to_lambdas(const SingleModeGate& gate) {
  struct Visitor {
    Lambdas operator()(const Identity&) const { return {0.0, 0.0, 0.0, 0.0}; }
    Lambdas operator()(const Fourier&) const { return {1.0, 1.0, 1.0, 0.0}; }
    Lambdas operator()(const Shear& s) const { return {s.lambda, 0.0, 0.0, 0.0}; }
    Lambdas operator()(const ExplicitGate& g) const { return gate_to_lambdas(g.target); }
  };
  return std::visit(Visitor{}, gate);
}

inline std::string gate_name(const SingleModeGate& gate) {
  struct Visitor {
    std::string operator()(const Identity&) const { return "I"; }
    std::string operator()(const Fourier&) const { return "F"; }
    std::string operator()(const Shear& s) const {
      const double r = std::round(s.lambda);
      return r == s.lambda ? "S(" + std::to_string(static_cast<long>(r)) + ")" : "S(" + std::to_string(s.lambda) + ")";
    }
    std::string operator()(const ExplicitGate&) const { return "M"; }
  };
  return std::visit(Visitor{}, gate);
}

/// Ideal infinite-squeezing reference M sigma M^T.
inline Matrix expected_output(const SymplecticMatrix& m, const Matrix& input_cov) {
  if (static_cast<Eigen::Index>(m.dim()) != input_cov.rows()) {
    throw std::invalid_argument("expected_output: dimension mismatch");
  }
  return m.matrix() * input_cov * m.matrix().transpose();
}

/// Reference for the dual-rail CZ: (f + f) CZ (sigma1 + sigma2) CZ^T (f + f)^T.
/// The trailing Fourier on each rail is the by-product of one p-teleportation.
inline Matrix expected_cz_output(const GaussianState& in1, const GaussianState& in2, double weight = 1.0) {
  if (in1.n_modes() != 1 || in2.n_modes() != 1) throw std::invalid_argument("expected_cz_output: single-mode inputs required");
  const Matrix f2 = direct_sum(Matrix(fourier_matrix()), Matrix(fourier_matrix()));
  const Matrix s = f2 * gaussian::cz_symplectic(2, 0, 1, weight).matrix();
  return s * direct_sum(in1.cov(), in2.cov()) * s.transpose();
}

// ---------------------------------------------------------------------------
// Measurement plans

/// A cluster resource together with the order and bases of its measurements.
/// Both the projective oracle and the continuous-monitoring protocol consume
/// the same plan, so their outputs refer to identical node layouts.
struct MeasurementPlan {
  GaussianState resource;
  std::vector<std::size_t> measured;      // node indices in measurement order
  std::vector<QuadratureAngle> angles;    // one per measured node
  std::vector<std::size_t> outputs;       // nodes carrying the result

  [[nodiscard]] std::size_t n_steps() const { return measured.size(); }

  void validate() const {
    if (measured.size() != angles.size()) throw std::invalid_argument("MeasurementPlan: angles/measured size mismatch");
    if (outputs.empty()) throw std::invalid_argument("MeasurementPlan: no output nodes");
    for (auto m : measured) {
      if (m >= resource.n_modes()) throw std::out_of_range("MeasurementPlan: measured node out of range");
    }
    for (auto o : outputs) {
      if (o >= resource.n_modes()) throw std::out_of_range("MeasurementPlan: output node out of range");
    }
  }
};

/// Input CZ-attached to a four-node wire, i.e. a five-node linear cluster
/// input - a1 - a2 - a3 - a4. Nodes 0..3 are measured with p + l_j q; node 4 is
/// the output.
inline MeasurementPlan single_mode_plan(const GaussianState& input, const Lambdas& lambdas, double r_cluster_db) {
  if (input.n_modes() != 1) throw std::invalid_argument("single_mode_plan: input must be single-mode");
  GaussianState resource = gaussian::tensor(input, gaussian::build_cluster(gaussian::GraphSpec{4, {}}, r_cluster_db));
  for (std::size_t j = 0; j < 4; ++j) resource = gaussian::apply_cz(resource, j, j + 1);
  MeasurementPlan plan{std::move(resource), {0, 1, 2, 3}, {}, {4}};
  for (double l : lambdas) plan.angles.push_back(lambda_to_phase(l));
  return plan;
}

/// Minimal dual rail: the four-node wire e1 - in1 - in2 - e2 where the inputs
/// sit on the two middle nodes. p-measuring the middle column teleports both
/// inputs onto the end nodes with the in1-in2 edge acting as a CZ.
inline MeasurementPlan cz_plan(const GaussianState& in1, const GaussianState& in2, double r_cluster_db,
                               double weight = 1.0) {
  if (in1.n_modes() != 1 || in2.n_modes() != 1) throw std::invalid_argument("cz_plan: inputs must be single-mode");
  const GaussianState end = gaussian::squeeze_momentum(gaussian::vacuum(1), 0, r_cluster_db);
  GaussianState resource = gaussian::tensor(gaussian::tensor(end, in1), gaussian::tensor(in2, end));
  resource = gaussian::apply_cz(resource, 0, 1);
  if (weight != 0.0) resource = gaussian::apply_cz(resource, 1, 2, weight);
  resource = gaussian::apply_cz(resource, 2, 3);
  return MeasurementPlan{std::move(resource), {1, 2}, {QuadratureAngle::momentum(), QuadratureAngle::momentum()}, {0, 3}};
}

/// Default input: vacuum squeezed in momentum like the cluster nodes.
inline GaussianState default_input(double r_cluster_db) {
  return gaussian::squeeze_momentum(gaussian::vacuum(1), 0, r_cluster_db);
}

inline MeasurementPlan make_plan(const GateProgram& program, double r_cluster_db) {
  const GaussianState input = default_input(r_cluster_db);
  if (const auto* p = std::get_if<SingleModeProgram>(&program)) return single_mode_plan(input, p->lambdas, r_cluster_db);
  return cz_plan(input, input, r_cluster_db, std::get<CzProgram>(program).weight);
}

/// Projectively measures steps [first_step, n_steps) of the plan on `state`
/// (whose first resource.n_modes() modes are the cluster nodes) and returns
/// the reduced state of the output nodes. Modes beyond the cluster, and nodes
/// measured before first_step, are traced out.
inline GaussianState project_remaining(const MeasurementPlan& plan, const GaussianState& state, std::size_t first_step) {
  std::vector<std::pair<std::size_t, QuadratureAngle>> todo;
  std::vector<std::size_t> keep;
  for (std::size_t s = first_step; s < plan.n_steps(); ++s) {
    keep.push_back(plan.measured[s]);
  }
  keep.insert(keep.end(), plan.outputs.begin(), plan.outputs.end());
  GaussianState reduced = gaussian::partial_trace(state, keep);
  // In `reduced`, future measured nodes come first, in plan order.
  for (std::size_t s = first_step; s < plan.n_steps(); ++s) {
    todo.emplace_back(s - first_step, plan.angles[s]);
  }
  return gaussian::homodyne_project_many(std::move(reduced), todo);
}

inline GaussianState run_projective(const MeasurementPlan& plan) {
  plan.validate();
  return project_remaining(plan, plan.resource, 0);
}

inline GaussianState run_projective_mbqc(const GaussianState& input, const Lambdas& lambdas, double r_cluster_db) {
  return run_projective(single_mode_plan(input, lambdas, r_cluster_db));
}

inline GaussianState run_projective_cz(const GaussianState& in1, const GaussianState& in2, double r_cluster_db,
                                       double weight = 1.0) {
  return run_projective(cz_plan(in1, in2, r_cluster_db, weight));
}

}  // namespace mechcluster::mbqc
