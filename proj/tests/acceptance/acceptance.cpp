// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed here, next to each check.

#include "mechcluster/dynamics.hpp"
#include "mechcluster/fidelity.hpp"
#include "mechcluster/gaussian.hpp"
#include "mechcluster/mbqc.hpp"
#include "mechcluster/optomech.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace mechcluster;
using namespace mechcluster::gaussian;
using namespace mechcluster::optomech;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. Four-step decomposition against an explicit matrix product.

Outcome criterion_decomposition() {
  const Matrix2 f{{0.0, -1.0}, {1.0, 0.0}};
  auto s = [](double l) { return Matrix2{{1.0, 0.0}, {l, 1.0}}; };
  auto product = [&](const mbqc::Lambdas& l) { return Matrix2(f * s(l[3]) * f * s(l[2]) * f * s(l[1]) * f * s(l[0])); };

  std::mt19937 rng(20240601);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const mbqc::Lambdas l{u(rng), u(rng), u(rng), u(rng)};
    worst = std::max(worst, max_abs(mbqc::lambdas_to_symplectic(l).matrix() - Matrix(product(l))));
  }
  const double tol = 1e-12;
  const double e_id = max_abs(mbqc::lambdas_to_symplectic({0, 0, 0, 0}).matrix() - Matrix::Identity(2, 2));
  const double e_f = max_abs(mbqc::lambdas_to_symplectic({1, 1, 1, 0}).matrix() - Matrix(f));
  const double e_s = max_abs(mbqc::lambdas_to_symplectic({1, 0, 0, 0}).matrix() - Matrix(s(1.0)));
  return {worst <= tol && e_id <= tol && e_f <= tol && e_s <= tol,
          "max |closed form - product| over 1000 draws = " + fmt(worst, 3) + " (tol 1e-12); named gates I/F/S(1) err " +
              fmt(e_id, 2) + "/" + fmt(e_f, 2) + "/" + fmt(e_s, 2)};
}

// ---------------------------------------------------------------------------
// 2. Projective oracle against the ideal gate.

Outcome criterion_projective() {
  const GaussianState input = squeeze_momentum(vacuum(1), 0, 3.0);
  const auto gates = standard_gates();
  bool pass = true;
  std::string detail = "F at 20 dB:";
  for (const auto& g : gates) {
    const auto l = mbqc::to_lambdas(g);
    const double fid = fidelity(mbqc::run_projective_mbqc(input, l, 20.0),
                                GaussianState(mbqc::expected_output(mbqc::lambdas_to_symplectic(l), input.cov())));
    pass = pass && fid > 0.999;
    detail += " " + mbqc::gate_name(g) + "=" + fmt(fid, 6);
  }
  detail += " (need > 0.999); monotone 3..30 dB:";
  for (const auto& g : gates) {
    const auto l = mbqc::to_lambdas(g);
    const GaussianState ideal(mbqc::expected_output(mbqc::lambdas_to_symplectic(l), input.cov()));
    double prev = -1.0;
    int drops = 0;
    double first_drop_db = 0.0;
    for (int db = 3; db <= 30; ++db) {
      const double fid = fidelity(mbqc::run_projective_mbqc(input, l, db), ideal);
      if (fid < prev) {
        if (drops++ == 0) first_drop_db = db;
      }
      prev = fid;
    }
    pass = pass && drops == 0;
    detail += " " + mbqc::gate_name(g) + (drops == 0 ? "=yes" : "=no(drop at " + fmt(first_drop_db, 3) + " dB)");
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 3. Integrator against closed-form solutions.

Outcome criterion_integrator() {
  // Thermal relaxation: sigma(t) = e^{-g t} sigma0 + (1 - e^{-g t}) (n + 1/2) I.
  const double gamma = 2.0e3;
  const double n = 4.0;
  dynamics::CouplingSpec c;
  c.hamiltonian = Matrix::Zero(2, 2);
  c.dissipative = std::sqrt(gamma) * Matrix::Identity(2, 2);
  dynamics::BathSpec b;
  b.dissipative = (n + 0.5) * Matrix::Identity(2, 2);
  const GaussianState s0 = rotate(squeeze_momentum(vacuum(1), 0, 8.0), 0, 0.3);
  const auto thermal_traj = dynamics::integrate(s0, dynamics::assemble(c, b), 2e-3, 1e-6, {.sample_every = 50});
  double err_thermal = 0.0;
  for (std::size_t i = 0; i < thermal_traj.times.size(); ++i) {
    const double d = std::exp(-gamma * thermal_traj.times[i]);
    const Matrix expect = d * s0.cov() + (1.0 - d) * (n + 0.5) * Matrix::Identity(2, 2);
    err_thermal = std::max(err_thermal, max_abs(thermal_traj.states[i].cov() - expect));
  }

  // Pure QND monitoring of q with a squeezed post-measurement state:
  // V_q = V0 / (1 + k w2 V0 t), V_p = P0 + (k/2 - k w1/4) t, w = diag((sigma_B + sigma_m)^-1).
  const double k = 1.5e4;
  double err_qnd = 0.0;
  for (double db : {3.0, 10.0, 20.0}) {
    const Matrix sm = dynamics::BathSpec::homodyne_post_measurement(db);
    dynamics::CouplingSpec q;
    q.hamiltonian = Matrix::Zero(2, 2);
    q.monitored = Matrix::Zero(2, 2);
    q.monitored(0, 0) = std::sqrt(k);
    dynamics::BathSpec qb;
    qb.monitored = 0.5 * Matrix::Identity(2, 2);
    qb.post_measurement = sm;
    const double w1 = 1.0 / (0.5 + sm(0, 0));
    const double w2 = 1.0 / (0.5 + sm(1, 1));
    const GaussianState start = thermal(1, 1.0);
    const double v0 = start.cov()(0, 0);
    const double p0 = start.cov()(1, 1);
    const auto traj = dynamics::integrate(start, dynamics::assemble(q, qb), 1e-3, 2e-7, {.sample_every = 500});
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      const double t = traj.times[i];
      const Matrix& s = traj.states[i].cov();
      err_qnd = std::max({err_qnd, std::abs(s(0, 0) - v0 / (1.0 + k * w2 * v0 * t)),
                          std::abs(s(1, 1) - (p0 + (k / 2 - k * w1 / 4) * t)), std::abs(s(0, 1))});
    }
  }
  return {err_thermal <= 1e-8 && err_qnd <= 1e-8,
          "thermal max err " + fmt(err_thermal, 3) + ", QND max err " + fmt(err_qnd, 3) + " (tol 1e-8)"};
}

// ---------------------------------------------------------------------------
// 4. Close-to-ideal parameters converge.

Outcome criterion_set2_convergence() {
  const auto params = PhysicalParams::set2();
  const auto plan = plan_for(mbqc::default_input(params.r_cluster_db), mbqc::SingleModeProgram{{1, 0, 0, 0}}, params);
  ProtocolOptions opts;
  opts.samples_per_step = 1;
  const double t_mons[] = {50e-6, 100e-6, 200e-6};
  const auto scan = equal_step_scan(plan, params, t_mons, opts);
  std::string detail = "Set 2, S(1), equal steps:";
  for (const auto& p : scan) detail += " " + fmt(p.t_mon * 1e6, 4) + " us -> " + fmt(p.final_fidelity, 6);
  detail += " (need >= 0.99 at 100 us)";
  return {scan[1].final_fidelity >= 0.99, detail};
}

// ---------------------------------------------------------------------------
// 5. Realistic parameters with optimised schedules.

Outcome criterion_set1_optimized() {
  const auto params = PhysicalParams::set1();
  const auto input = mbqc::default_input(params.r_cluster_db);
  const OptimizerConfig cfg{0.1e-6, 400e-6};
  const auto s1 = optimize_schedule(plan_for(input, mbqc::SingleModeProgram{{1, 0, 0, 0}}, params), params, cfg);
  const auto cz = optimize_schedule(plan_for(input, mbqc::CzProgram{1.0}, params), params, cfg);
  return {s1.final_fidelity > 0.95 && cz.final_fidelity > 0.95,
          "Set 1, r_cluster 3 dB: S(1) " + fmt(s1.final_fidelity, 6) + ", CZ " + fmt(cz.final_fidelity, 6) +
              " (need > 0.95)"};
}

// ---------------------------------------------------------------------------
// 6. Optimised steps at 10 K.

Outcome criterion_optimized_steps_10k() {
  auto params = PhysicalParams::set1();
  params.temperature = 10.0;
  const auto input = mbqc::default_input(params.r_cluster_db);
  const auto plan = plan_for(input, mbqc::SingleModeProgram{mbqc::to_lambdas(mbqc::Identity{})}, params);
  const auto opt = optimize_schedule(plan, params, OptimizerConfig{0.1e-6, 400e-6});
  const double target[] = {21.4e-6, 21.2e-6, 21.1e-6, 21.1e-6};
  bool within = opt.schedule.durations.size() == 4;
  std::string steps;
  for (std::size_t i = 0; i < opt.schedule.durations.size() && i < 4; ++i) {
    const double d = opt.schedule.durations[i];
    within = within && std::abs(d - target[i]) <= 0.15 * target[i];
    steps += (i ? "/" : "") + fmt(d * 1e6, 4);
  }
  std::size_t drops = 0;
  for (std::size_t i = 1; i < opt.trace.size(); ++i) drops += opt.trace[i].second < opt.trace[i - 1].second;
  const bool monotone = drops == 0;
  return {within && monotone, "T = 10 K, I: steps " + steps + " us (need 21.4/21.2/21.1/21.1 +-15%), trace monotone " +
                                  (monotone ? "yes" : "no (" + std::to_string(drops) + " decreases)") +
                                  ", final fidelity " + fmt(opt.final_fidelity, 6)};
}

// ---------------------------------------------------------------------------
// 7. Detector and loss parameters barely matter at long monitoring times.

Outcome criterion_noise_insensitivity() {
  const double t_mon = 200e-6;
  const auto base = PhysicalParams::set1();
  const mbqc::GateProgram program = mbqc::SingleModeProgram{{1, 0, 0, 0}};
  ProtocolOptions opts;
  opts.samples_per_step = 1;
  auto final_fidelity = [&](const PhysicalParams& p) {
    return run_monitoring_protocol(mbqc::default_input(p.r_cluster_db), program, p, MonitoringSchedule::equal(4, t_mon),
                                   opts)
        .final_fidelity();
  };
  auto spread = [&](const std::function<void(PhysicalParams&, double)>& set, std::initializer_list<double> values) {
    double lo = 1.0, hi = 0.0;
    for (double v : values) {
      PhysicalParams p = base;
      set(p, v);
      const double f = final_fidelity(p);
      lo = std::min(lo, f);
      hi = std::max(hi, f);
    }
    return hi - lo;
  };
  const double s_eta = spread([](PhysicalParams& p, double v) { p.efficiency = v; }, {1.0, 0.9, 0.8});
  const double s_tau = spread([](PhysicalParams& p, double v) { p.tau = v * p.kappa; }, {0.01, 0.05, 0.1});
  const double s_r = spread([](PhysicalParams& p, double v) { p.r_post_meas_db = v; }, {20.0, 10.0, 5.0});
  return {s_eta < 0.02 && s_tau < 0.02 && s_r < 0.02,
          "Set 1, S(1), 200 us steps: spread over eta " + fmt(s_eta, 3) + ", tau " + fmt(s_tau, 3) + ", r_post " +
              fmt(s_r, 3) + " (need < 0.02 each)"};
}

// ---------------------------------------------------------------------------
// 8. Gate choice barely matters.

Outcome criterion_gate_insensitivity() {
  ProtocolOptions opts;
  opts.samples_per_step = 1;
  const auto runs = gate_comparison(PhysicalParams::set1(), standard_gates(), MonitoringSchedule::equal(4, 100e-6), opts);
  double lo = 1.0, hi = 0.0;
  std::string detail = "Set 1, 100 us steps:";
  for (const auto& r : runs) {
    const double f = r.result.final_fidelity();
    lo = std::min(lo, f);
    hi = std::max(hi, f);
    detail += " " + r.name + "=" + fmt(f, 5);
  }
  return {hi - lo < 0.05, detail + "; spread " + fmt(hi - lo, 3) + " (need < 0.05)"};
}

// ---------------------------------------------------------------------------
// 9. Structural properties along every trajectory.

struct StructureStats {
  double worst_asymmetry = 0.0;
  double min_nu = 1e300;
  double worst_decay = 0.0;  // smallest start/end decorrelation ratio (Set 2 only)
  std::size_t samples = 0;
};

void check_trajectories(const mbqc::MeasurementPlan& plan, const PhysicalParams& params, bool check_decay,
                        StructureStats& stats) {
  MonitoringRun run(plan, params);
  const MonitoringSchedule schedule = MonitoringSchedule::equal(plan.n_steps(), 100e-6);
  for (std::size_t s = 0; s < plan.n_steps(); ++s) {
    run.begin_step(s);
    const auto coeffs = run.coefficients(s);
    const dynamics::RiccatiStepper stepper(coeffs);
    const std::size_t node = plan.measured[s];
    const double start = measured_node_decorrelation(run.state(), node, plan.angles[s]);
    double end = start;
    run.advance(stepper, schedule.durations[s], run.step_dt(coeffs), 200, [&](double, const Matrix& sigma) {
      const double scale = std::max(1.0, max_abs(sigma));
      stats.worst_asymmetry = std::max(stats.worst_asymmetry, max_abs(sigma - sigma.transpose()) / scale);
      const Matrix sym = 0.5 * (sigma + sigma.transpose());
      const GaussianState st(sym);
      const auto nu = symplectic_eigenvalues(st);
      stats.min_nu = std::min(stats.min_nu, *std::min_element(nu.begin(), nu.end()));
      end = measured_node_decorrelation(st, node, plan.angles[s]);
      ++stats.samples;
    });
    if (check_decay) {
      const double ratio = end > 0.0 ? start / end : 1e300;
      stats.worst_decay = s == 0 && stats.worst_decay == 0.0 ? ratio : std::min(stats.worst_decay, ratio);
    }
  }
}

Outcome criterion_structure() {
  StructureStats set2_stats;
  StructureStats set1_stats;
  for (bool ideal : {true, false}) {
    const auto params = ideal ? PhysicalParams::set2() : PhysicalParams::set1();
    const auto input = mbqc::default_input(params.r_cluster_db);
    std::vector<mbqc::GateProgram> programs;
    for (const auto& g : standard_gates()) programs.emplace_back(mbqc::SingleModeProgram{mbqc::to_lambdas(g)});
    programs.emplace_back(mbqc::CzProgram{1.0});
    for (const auto& program : programs) {
      check_trajectories(plan_for(input, program, params), params, ideal, ideal ? set2_stats : set1_stats);
    }
  }
  const double asym = std::max(set1_stats.worst_asymmetry, set2_stats.worst_asymmetry);
  const double nu = std::min(set1_stats.min_nu, set2_stats.min_nu);
  const double decay = set2_stats.worst_decay;
  return {asym <= 1e-12 && nu >= 0.5 - 1e-6 && decay >= 100.0,
          std::to_string(set1_stats.samples + set2_stats.samples) +
              " samples (Set 1 and Set 2, 5 gates + CZ): max relative asymmetry " + fmt(asym, 3) +
              " (tol 1e-12), min symplectic eigenvalue " + fmt(nu, 10) +
              " (need >= 0.5 - 1e-6), weakest per-step decorrelation factor under Set 2 " + fmt(decay, 4) +
              " (need >= 100)"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "decomposition identity", criterion_decomposition},
      {2, "projective oracle", criterion_projective},
      {3, "integrator oracle", criterion_integrator},
      {4, "close-to-ideal convergence", criterion_set2_convergence},
      {5, "realistic regime, optimised", criterion_set1_optimized},
      {6, "optimised steps at 10 K", criterion_optimized_steps_10k},
      {7, "noise-parameter insensitivity", criterion_noise_insensitivity},
      {8, "gate insensitivity", criterion_gate_insensitivity},
      {9, "trajectory structure", criterion_structure},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s [%d] %s: %s [%.2f s]\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
