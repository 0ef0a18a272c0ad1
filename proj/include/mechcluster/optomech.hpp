#pragma once

// Cavity optomechanics with N mechanical resonators prepared in a cluster
// state. Each MBQC measurement is emulated by QND-coupling the cavity
// position to the quadrature X_phi of one resonator and continuously
// homodyning the cavity output; resonators are addressed one at a time.
//
// Mode layout: mechanical modes 0..N-1, cavity last.

#include "mechcluster/dynamics.hpp"
#include "mechcluster/fidelity.hpp"
#include "mechcluster/gaussian.hpp"
#include "mechcluster/mbqc.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace mechcluster::optomech {

using gaussian::GaussianState;
using gaussian::QuadratureAngle;

inline constexpr double kHbar = 1.054571817e-34;      // J s
inline constexpr double kBoltzmann = 1.380649e-23;    // J / K

/// Mean phonon number n = 1 / (exp(hbar w / kB T) - 1).
inline double thermal_occupancy(double angular_frequency, double temperature) {
  if (temperature < 0.0) throw std::invalid_argument("thermal_occupancy: negative temperature");
  if (!(angular_frequency > 0.0)) throw std::invalid_argument("thermal_occupancy: frequency must be positive");
  if (temperature == 0.0) return 0.0;
  return 1.0 / std::expm1(kHbar * angular_frequency / (kBoltzmann * temperature));
}

/// Resonator frequencies 2 pi j f0 for j = 1..n.
inline std::vector<double> harmonic_frequencies(std::size_t n, double base_hz = 11e6) {
  std::vector<double> out;
  for (std::size_t j = 1; j <= n; ++j) out.push_back(2.0 * kPi * static_cast<double>(j) * base_hz);
  return out;
}

/// All rates are angular (rad/s).
struct PhysicalParams {
  double efficiency = 1.0;      // eta
  double gamma = 0.0;           // mechanical damping
  double kappa = 0.0;           // monitored cavity decay
  double tau = 0.0;             // unmonitored cavity loss
  double coupling = 0.0;        // effective linearised coupling alpha g
  double temperature = 0.0;     // K
  double r_post_meas_db = 20.0;
  double r_cluster_db = 3.0;
  std::vector<double> mech_frequencies;  // rad/s

  void validate() const {
    if (!(efficiency > 0.0 && efficiency <= 1.0)) throw std::invalid_argument("PhysicalParams: efficiency must lie in (0, 1]");
    for (double r : {gamma, kappa, tau, coupling, temperature}) {
      if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("PhysicalParams: rates and temperature must be >= 0");
    }
    if (!(kappa > 0.0)) throw std::invalid_argument("PhysicalParams: monitored decay kappa must be positive");
    if (!(r_post_meas_db >= 0.0) || !(r_cluster_db >= 0.0)) throw std::invalid_argument("PhysicalParams: squeezing must be >= 0 dB");
    if (mech_frequencies.empty()) throw std::invalid_argument("PhysicalParams: no mechanical modes");
    for (double w : mech_frequencies) {
      if (!(w > 0.0)) throw std::invalid_argument("PhysicalParams: mechanical frequencies must be positive");
    }
  }

  /// Side-band resolved and weak-coupling sanity checks; advisory only.
  [[nodiscard]] std::vector<std::string> regime_warnings() const {
    std::vector<std::string> out;
    const double w_min = *std::min_element(mech_frequencies.begin(), mech_frequencies.end());
    if (kappa > 0.1 * w_min) out.push_back("kappa is not much smaller than the lowest mechanical frequency");
    if (coupling > 0.1 * w_min) out.push_back("alpha g is not much smaller than the lowest mechanical frequency");
    return out;
  }

  /// Experimentally motivated values.
  static PhysicalParams set1(std::size_t n_resonators = 5) {
    PhysicalParams p;
    p.efficiency = 0.99;
    p.gamma = 2.0 * kPi * 8.0;
    p.kappa = 2.0 * kPi * 0.33e6;
    p.tau = 0.01 * p.kappa;
    p.coupling = 0.35e6;
    p.temperature = 1e-3;
    p.r_post_meas_db = 10.0;
    p.r_cluster_db = 3.0;
    p.mech_frequencies = harmonic_frequencies(n_resonators);
    return p;
  }

  /// Close-to-ideal values: no losses, near-perfect homodyne.
  static PhysicalParams set2(std::size_t n_resonators = 5) {
    PhysicalParams p;
    p.efficiency = 1.0;
    p.gamma = 0.0;
    p.kappa = 2.0 * kPi * 0.1e6;
    p.tau = 0.0;
    p.coupling = 0.35e6;
    p.temperature = 0.0;
    p.r_post_meas_db = 20.0;
    p.r_cluster_db = 3.0;
    p.mech_frequencies = harmonic_frequencies(n_resonators);
    return p;
  }
};

struct QndStep {
  dynamics::CouplingSpec coupling;
  dynamics::BathSpec bath;
};

/// Coupling and bath for one measurement step: H_k = 2 (alpha g) X X_phi with
/// X_phi = X_k cos(phi) + P_k sin(phi); the sqrt(kappa) cavity channel is
/// homodyned, the sqrt(tau) cavity channel and one sqrt(gamma) thermal channel
/// per resonator are dissipative. Pass active = nullopt for an undriven cavity.
inline QndStep build_qnd_step(const PhysicalParams& params, std::optional<std::size_t> active, QuadratureAngle phi,
                              std::size_t n_mech) {
  params.validate();
  if (params.mech_frequencies.size() < n_mech) throw std::invalid_argument("build_qnd_step: missing mechanical frequencies");
  if (active && *active >= n_mech) throw std::out_of_range("build_qnd_step: invalid resonator index");

  const auto dim = static_cast<Eigen::Index>(2 * (n_mech + 1));
  const auto cav = static_cast<Eigen::Index>(2 * n_mech);
  QndStep step;

  step.coupling.hamiltonian = Matrix::Zero(dim, dim);
  if (active) {
    const auto k = static_cast<Eigen::Index>(2 * *active);
    const double g = 2.0 * params.coupling;
    const double c = g * std::cos(phi.radians());
    const double s = g * std::sin(phi.radians());
    step.coupling.hamiltonian(cav, k) = step.coupling.hamiltonian(k, cav) = c;
    step.coupling.hamiltonian(cav, k + 1) = step.coupling.hamiltonian(k + 1, cav) = s;
  }

  step.coupling.monitored = Matrix::Zero(dim, 2);
  step.coupling.monitored.block<2, 2>(cav, 0) = std::sqrt(params.kappa) * Matrix2::Identity();

  const auto n_diss = static_cast<Eigen::Index>(2 * (n_mech + 1));
  step.coupling.dissipative = Matrix::Zero(dim, n_diss);
  step.bath.dissipative = Matrix::Zero(n_diss, n_diss);
  step.coupling.dissipative.block<2, 2>(cav, 0) = std::sqrt(params.tau) * Matrix2::Identity();
  step.bath.dissipative.block<2, 2>(0, 0) = 0.5 * Matrix2::Identity();
  for (std::size_t j = 0; j < n_mech; ++j) {
    const auto row = static_cast<Eigen::Index>(2 * j);
    const auto col = static_cast<Eigen::Index>(2 * (j + 1));
    const double n = thermal_occupancy(params.mech_frequencies[j], params.temperature);
    step.coupling.dissipative.block<2, 2>(row, col) = std::sqrt(params.gamma) * Matrix2::Identity();
    step.bath.dissipative.block<2, 2>(col, col) = (n + 0.5) * Matrix2::Identity();
  }

  step.bath.monitored = 0.5 * Matrix::Identity(2, 2);
  step.bath.post_measurement = dynamics::BathSpec::homodyne_post_measurement(params.r_post_meas_db);
  step.bath.efficiency = params.efficiency;
  return step;
}

/// Largest rate entering the dynamics; RK4 steps are 1 / (20 * rate).
inline double max_rate(const PhysicalParams& params, const dynamics::EvolutionCoefficients& coeffs) {
  double rate = std::max({params.kappa + params.tau, params.gamma, 2.0 * params.coupling});
  if (coeffs.backaction.size() > 0) rate = std::max(rate, coeffs.gain().norm());
  return rate;
}

// ---------------------------------------------------------------------------
// Protocol

struct MonitoringSchedule {
  std::vector<double> durations;  // seconds, one per step

  static MonitoringSchedule equal(std::size_t steps, double t_mon) {
    return {std::vector<double>(steps, t_mon)};
  }

  void validate(std::size_t steps) const {
    if (durations.size() != steps) {
      throw std::invalid_argument("MonitoringSchedule: expected " + std::to_string(steps) + " durations");
    }
    for (double d : durations) {
      if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("MonitoringSchedule: durations must be positive");
    }
  }

  [[nodiscard]] double total() const {
    double t = 0.0;
    for (double d : durations) t += d;
    return t;
  }
};

struct ProtocolOptions {
  bool reset_cavity = false;      // re-prepare the cavity in vacuum before each step
  double max_dt = 0.0;            // 0: 1 / (20 * max rate)
  std::size_t samples_per_step = 100;
  bool record_states = false;     // keep the full covariance at every sample
  std::size_t check_every = 100;
};

/// Samples of one monitoring step. Times are absolute (from protocol start).
struct StepTrace {
  std::size_t node = 0;
  std::vector<double> times;
  std::vector<double> fidelity;
  std::vector<GaussianState> states;
};

struct ProtocolResult {
  std::vector<StepTrace> steps;
  GaussianState output;
  GaussianState reference;
  MonitoringSchedule schedule;

  [[nodiscard]] double final_fidelity() const { return steps.back().fidelity.back(); }

  /// All samples concatenated in time order.
  [[nodiscard]] std::vector<std::pair<double, double>> fidelity_trace() const {
    std::vector<std::pair<double, double>> out;
    for (const auto& s : steps) {
      for (std::size_t i = 0; i < s.times.size(); ++i) out.emplace_back(s.times[i], s.fidelity[i]);
    }
    return out;
  }
};

/// Cluster nodes followed by the cavity, initially in vacuum.
inline GaussianState initial_state(const mbqc::MeasurementPlan& plan) {
  return gaussian::tensor(plan.resource, gaussian::vacuum(1));
}

/// Fidelity between the oracle output and the output obtained by finishing
/// the remaining steps (after `step`) projectively from `state`.
inline double would_be_fidelity(const mbqc::MeasurementPlan& plan, const GaussianState& state, std::size_t step,
                                const GaussianState& reference) {
  return gaussian::fidelity(mbqc::project_remaining(plan, state, step + 1), reference);
}

inline void reset_cavity(Matrix& sigma) {
  const Eigen::Index c = sigma.rows() - 2;
  sigma.middleRows(c, 2).setZero();
  sigma.middleCols(c, 2).setZero();
  sigma.block<2, 2>(c, c) = 0.5 * Matrix2::Identity();
}

/// Runs the measurement steps of `plan` one after another on the physical
/// system, each as continuous monitoring of duration schedule.durations[s].
class MonitoringRun {
 public:
  MonitoringRun(mbqc::MeasurementPlan plan, PhysicalParams params, ProtocolOptions options = {})
      : plan_(std::move(plan)),
        params_(std::move(params)),
        options_(options),
        reference_(mbqc::run_projective(plan_)),
        sigma_(initial_state(plan_).cov()) {
    params_.validate();
    plan_.validate();
    if (params_.mech_frequencies.size() < plan_.resource.n_modes()) {
      throw std::invalid_argument("MonitoringRun: fewer mechanical frequencies than cluster nodes");
    }
  }

  [[nodiscard]] const mbqc::MeasurementPlan& plan() const { return plan_; }
  [[nodiscard]] const GaussianState& reference() const { return reference_; }
  [[nodiscard]] GaussianState state() const { return GaussianState(sigma_); }
  [[nodiscard]] double time() const { return time_; }
  [[nodiscard]] std::size_t n_mech() const { return plan_.resource.n_modes(); }

  /// Coefficients for step s (or an undriven cavity when s == n_steps).
  [[nodiscard]] dynamics::EvolutionCoefficients coefficients(std::size_t s) const {
    const std::optional<std::size_t> active =
        s < plan_.n_steps() ? std::optional<std::size_t>(plan_.measured[s]) : std::nullopt;
    const QuadratureAngle phi = s < plan_.n_steps() ? plan_.angles[s] : QuadratureAngle();
    const QndStep q = build_qnd_step(params_, active, phi, n_mech());
    return dynamics::assemble(q.coupling, q.bath);
  }

  [[nodiscard]] double step_dt(const dynamics::EvolutionCoefficients& coeffs) const {
    return options_.max_dt > 0.0 ? options_.max_dt : 1.0 / (20.0 * max_rate(params_, coeffs));
  }

  [[nodiscard]] double fidelity_now(std::size_t s) const {
    return would_be_fidelity(plan_, GaussianState(sigma_), s, reference_);
  }

  void restore(Matrix sigma, double time) {
    sigma_ = std::move(sigma);
    time_ = time;
  }

  /// Prepares step s: optional cavity reset.
  void begin_step(std::size_t) {
    if (options_.reset_cavity) reset_cavity(sigma_);
  }

  /// Advances the current state by `duration` under step s's dynamics.
  /// `on_sample` receives (time, state covariance) roughly samples times.
  template <typename OnSample>
  void advance(const dynamics::RiccatiStepper& stepper, double duration, double dt, std::size_t samples,
               OnSample&& on_sample) {
    const std::size_t n = dynamics::substeps_for(duration, dt);
    if (n == 0) return;
    const double h = duration / static_cast<double>(n);
    const std::size_t every = std::max<std::size_t>(1, samples > 0 ? n / samples : n);
    const std::size_t check = std::max<std::size_t>(1, options_.check_every);
    const double t0 = time_;
    for (std::size_t i = 1; i <= n; ++i) {
      stepper.step(sigma_, h);
      if (i % check == 0 || i == n) dynamics::check_trajectory_point(sigma_, t0 + static_cast<double>(i) * h, 1e-6);
      if (i % every == 0 || i == n) on_sample(t0 + static_cast<double>(i) * h, sigma_);
    }
    time_ = t0 + duration;
  }

  /// Full protocol with a fixed schedule.
  ProtocolResult run(const MonitoringSchedule& schedule) {
    schedule.validate(plan_.n_steps());
    ProtocolResult result{{}, GaussianState(sigma_), reference_, schedule};
    for (std::size_t s = 0; s < plan_.n_steps(); ++s) {
      begin_step(s);
      const auto coeffs = coefficients(s);
      const dynamics::RiccatiStepper stepper(coeffs);
      StepTrace trace;
      trace.node = plan_.measured[s];
      auto record = [&](double t, const Matrix& sigma) {
        const GaussianState st(sigma);
        trace.times.push_back(t);
        trace.fidelity.push_back(would_be_fidelity(plan_, st, s, reference_));
        if (options_.record_states) trace.states.push_back(st);
      };
      record(time_, sigma_);
      advance(stepper, schedule.durations[s], step_dt(coeffs), options_.samples_per_step, record);
      result.steps.push_back(std::move(trace));
    }
    result.output = mbqc::project_remaining(plan_, GaussianState(sigma_), plan_.n_steps());
    return result;
  }

 private:
  mbqc::MeasurementPlan plan_;
  PhysicalParams params_;
  ProtocolOptions options_;
  GaussianState reference_;
  Matrix sigma_;
  double time_ = 0.0;
};

inline ProtocolResult run_monitoring_protocol(const mbqc::MeasurementPlan& plan, const PhysicalParams& params,
                                              const MonitoringSchedule& schedule, const ProtocolOptions& options = {}) {
  MonitoringRun run(plan, params, options);
  return run.run(schedule);
}

/// Single-mode program on `input` (cluster at params.r_cluster_db), or the
/// dual-rail CZ with `input` on both rails.
inline mbqc::MeasurementPlan plan_for(const GaussianState& input, const mbqc::GateProgram& program,
                                      const PhysicalParams& params) {
  if (const auto* p = std::get_if<mbqc::SingleModeProgram>(&program)) {
    return mbqc::single_mode_plan(input, p->lambdas, params.r_cluster_db);
  }
  return mbqc::cz_plan(input, input, params.r_cluster_db, std::get<mbqc::CzProgram>(program).weight);
}

inline ProtocolResult run_monitoring_protocol(const GaussianState& input, const mbqc::GateProgram& program,
                                              const PhysicalParams& params, const MonitoringSchedule& schedule,
                                              const ProtocolOptions& options = {}) {
  return run_monitoring_protocol(plan_for(input, program, params), params, schedule, options);
}

/// Frobenius norm of the covariance between the measured quadrature X_phi of
/// `node` and every other mode. Monitoring drives it to zero; the conjugate
/// quadrature keeps finite covariances while its variance diverges, so it is
/// left out.
inline double measured_node_decorrelation(const GaussianState& state, std::size_t node, QuadratureAngle phi) {
  if (node >= state.n_modes()) throw std::out_of_range("measured_node_decorrelation: invalid node");
  const auto i = static_cast<Eigen::Index>(2 * node);
  const Vector row = std::cos(phi.radians()) * state.cov().row(i).transpose() +
                     std::sin(phi.radians()) * state.cov().row(i + 1).transpose();
  double sum = 0.0;
  for (Eigen::Index k = 0; k < row.size(); ++k) {
    if (k != i && k != i + 1) sum += row(k) * row(k);
  }
  return std::sqrt(sum);
}

inline std::vector<double> measured_node_decorrelation(const std::vector<GaussianState>& trace, std::size_t node,
                                                       QuadratureAngle phi) {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& s : trace) out.push_back(measured_node_decorrelation(s, node, phi));
  return out;
}

// ---------------------------------------------------------------------------
// Schedule optimisation

struct OptimizerConfig {
  double time_resolution = 0.1e-6;  // s
  double max_duration = 400e-6;     // per step, s
};

struct OptimizedSchedule {
  MonitoringSchedule schedule;
  std::vector<bool> reached_max;                      // step hit max_duration
  std::vector<std::pair<double, double>> trace;       // (time, fidelity), monotone
  double final_fidelity = 0.0;
  GaussianState output = gaussian::vacuum(1);

  [[nodiscard]] bool converged() const {
    return std::none_of(reached_max.begin(), reached_max.end(), [](bool b) { return b; });
  }
};

/// Greedy per-step search: each step is extended in increments of
/// time_resolution while the would-be output fidelity does not decrease, and
/// stops at the first decrease. Every step lasts at least one increment.
inline OptimizedSchedule optimize_schedule(const mbqc::MeasurementPlan& plan, const PhysicalParams& params,
                                           const OptimizerConfig& config, const ProtocolOptions& options = {}) {
  if (!(config.time_resolution > 0.0) || !(config.max_duration >= config.time_resolution)) {
    throw std::invalid_argument("optimize_schedule: need 0 < time_resolution <= max_duration");
  }
  MonitoringRun run(plan, params, options);
  OptimizedSchedule out;
  out.trace.emplace_back(0.0, run.fidelity_now(0));
  const auto max_increments = static_cast<std::size_t>(std::floor(config.max_duration / config.time_resolution + 1e-9));
  for (std::size_t s = 0; s < plan.n_steps(); ++s) {
    run.begin_step(s);
    const auto coeffs = run.coefficients(s);
    const dynamics::RiccatiStepper stepper(coeffs);
    const double dt = run.step_dt(coeffs);
    double best = run.fidelity_now(s);
    std::size_t taken = 0;
    bool hit_max = true;
    while (taken < max_increments) {
      Matrix before = run.state().cov();
      const double t_before = run.time();
      run.advance(stepper, config.time_resolution, dt, 0, [](double, const Matrix&) {});
      const double f = run.fidelity_now(s);
      if (f < best && taken > 0) {
        run.restore(std::move(before), t_before);  // reject the increment
        hit_max = false;
        break;
      }
      best = f;
      ++taken;
      out.trace.emplace_back(run.time(), f);
    }
    out.schedule.durations.push_back(static_cast<double>(taken) * config.time_resolution);
    out.reached_max.push_back(hit_max);
  }
  out.final_fidelity = out.trace.back().second;
  out.output = mbqc::project_remaining(plan, run.state(), plan.n_steps());
  return out;
}

// ---------------------------------------------------------------------------
// Comparisons

/// I, F, S(1), S(3), S(5).
inline std::vector<mbqc::SingleModeGate> standard_gates() {
  return {mbqc::Identity{}, mbqc::Fourier{}, mbqc::Shear{1.0}, mbqc::Shear{3.0}, mbqc::Shear{5.0}};
}

struct GateRun {
  std::string name;
  ProtocolResult result;
};

/// Runs each single-mode gate on the default input with the same schedule.
inline std::vector<GateRun> gate_comparison(const PhysicalParams& params, const std::vector<mbqc::SingleModeGate>& gates,
                                            const MonitoringSchedule& schedule, const ProtocolOptions& options = {}) {
  const GaussianState input = mbqc::default_input(params.r_cluster_db);
  std::vector<GateRun> out;
  for (const auto& gate : gates) {
    const mbqc::GateProgram program = mbqc::SingleModeProgram{mbqc::to_lambdas(gate)};
    out.push_back({mbqc::gate_name(gate), run_monitoring_protocol(input, program, params, schedule, options)});
  }
  return out;
}

struct ScanPoint {
  double t_mon = 0.0;
  double final_fidelity = 0.0;
};

/// Final fidelity of equal-step protocols as a function of the per-step time.
inline std::vector<ScanPoint> equal_step_scan(const mbqc::MeasurementPlan& plan, const PhysicalParams& params,
                                              std::span<const double> t_mons, const ProtocolOptions& options = {}) {
  std::vector<ScanPoint> out;
  ProtocolOptions opts = options;
  opts.samples_per_step = 1;
  for (double t : t_mons) {
    const auto result = run_monitoring_protocol(plan, params, MonitoringSchedule::equal(plan.n_steps(), t), opts);
    out.push_back({t, result.final_fidelity()});
  }
  return out;
}

}  // namespace mechcluster::optomech
