#pragma once

// The four harness commands as library calls. Each writes its tables into
// an output directory and returns the headline numbers.

#include "mechcluster/dynamics.hpp"
#include "mechcluster/fidelity.hpp"
#include "mechcluster/harness/config.hpp"
#include "mechcluster/harness/output.hpp"
#include "mechcluster/harness/sweep.hpp"
#include "mechcluster/mbqc.hpp"
#include "mechcluster/optomech.hpp"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace mechcluster::harness {

namespace fs = std::filesystem;

inline void require_fidelity(double f, const std::string& what) {
  if (!std::isfinite(f) || f < -1e-9 || f > 1.0 + 1e-9) {
    throw NumericalError(what + ": fidelity " + format_number(f) + " outside [0, 1]");
  }
}

inline Provenance provenance(const std::string& command, const ExperimentConfig& config) {
  Provenance p{command, config_hash(config), {}};
  p.notes.push_back("preset: " + config.preset.value_or("none"));
  p.notes.push_back("gate: " + config.gate);
  for (const auto& w : config.params.physical().regime_warnings()) p.notes.push_back("warning: " + w);
  return p;
}

inline fs::path prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

// ---------------------------------------------------------------------------

struct SimulateSummary {
  optomech::MonitoringSchedule schedule;
  double final_fidelity = 0.0;
  double peak_fidelity = 0.0;
  double peak_time = 0.0;
};

/// trace.csv: fidelity of the would-be output against time, per step.
/// summary.csv: one record.
inline SimulateSummary cmd_simulate(const ExperimentConfig& config, const fs::path& out_dir) {
  const auto plan = config.plan();
  const auto params = config.params.physical();
  const auto options = config.protocol_options();
  optomech::MonitoringSchedule schedule = config.fixed_schedule();
  if (config.schedule.mode == ScheduleMode::optimized) {
    schedule = optomech::optimize_schedule(plan, params, config.optimizer(), options).schedule;
  }
  const auto result = optomech::run_monitoring_protocol(plan, params, schedule, options);

  SimulateSummary s{schedule, result.final_fidelity(), -1.0, 0.0};
  for (const auto& [t, f] : result.fidelity_trace()) {
    require_fidelity(f, "simulate");
    if (f > s.peak_fidelity) {
      s.peak_fidelity = f;
      s.peak_time = t;
    }
  }

  prepare_dir(out_dir);
  const auto prov = provenance("simulate", config);
  TableWriter trace(out_dir / "trace.csv", prov, {"step", "node", "time_s", "fidelity"});
  for (std::size_t k = 0; k < result.steps.size(); ++k) {
    const auto& st = result.steps[k];
    for (std::size_t i = 0; i < st.times.size(); ++i) {
      trace.write(TableWriter::Row() << k << st.node << st.times[i] << st.fidelity[i]);
    }
  }
  trace.close();

  TableWriter summary(out_dir / "summary.csv", prov,
                      {"gate", "schedule_mode", "durations_s", "final_fidelity", "peak_fidelity", "peak_time_s"});
  summary.write(TableWriter::Row() << config.gate << to_string(config.schedule.mode) << join_numbers(schedule.durations)
                                   << s.final_fidelity << s.peak_fidelity << s.peak_time);
  summary.close();
  return s;
}

// ---------------------------------------------------------------------------

struct OptimizeSummary {
  optomech::OptimizedSchedule optimized;
  double equal_budget_fidelity = 0.0;  // equal steps with the same total time
};

/// schedule.csv, trace.csv (monotone optimised trace) and summary.csv.
inline OptimizeSummary cmd_optimize(const ExperimentConfig& config, const fs::path& out_dir) {
  const auto plan = config.plan();
  const auto params = config.params.physical();
  const auto options = config.protocol_options();
  OptimizeSummary s{optomech::optimize_schedule(plan, params, config.optimizer(), options), 0.0};
  for (const auto& [t, f] : s.optimized.trace) require_fidelity(f, "optimize");
  const double per_step = s.optimized.schedule.total() / static_cast<double>(plan.n_steps());
  const double equal_t[] = {per_step};
  s.equal_budget_fidelity = optomech::equal_step_scan(plan, params, equal_t, options).front().final_fidelity;
  require_fidelity(s.equal_budget_fidelity, "optimize");

  prepare_dir(out_dir);
  const auto prov = provenance("optimize", config);
  TableWriter sched(out_dir / "schedule.csv", prov, {"step", "node", "duration_s", "reached_max"});
  for (std::size_t k = 0; k < s.optimized.schedule.durations.size(); ++k) {
    sched.write(TableWriter::Row() << k << plan.measured[k] << s.optimized.schedule.durations[k]
                                   << static_cast<bool>(s.optimized.reached_max[k]));
  }
  sched.close();

  TableWriter trace(out_dir / "trace.csv", prov, {"time_s", "fidelity"});
  for (const auto& [t, f] : s.optimized.trace) trace.write(TableWriter::Row() << t << f);
  trace.close();

  TableWriter summary(out_dir / "summary.csv", prov,
                      {"gate", "durations_s", "optimized_fidelity", "equal_budget_fidelity", "converged"});
  summary.write(TableWriter::Row() << config.gate << join_numbers(s.optimized.schedule.durations)
                                   << s.optimized.final_fidelity << s.equal_budget_fidelity << s.optimized.converged());
  summary.close();
  return s;
}

// ---------------------------------------------------------------------------

/// sweep.csv: one record per grid point, in grid order.
inline SweepResult cmd_sweep(const ExperimentConfig& config, const fs::path& out_dir, std::size_t workers) {
  auto result = run_sweep(config, workers);
  for (const auto& r : result.records) {
    if (config.sweep.optimize) require_fidelity(r.optimized_fidelity, "sweep");
    if (config.sweep.t_mon_scan.points > 0) require_fidelity(r.best_equal_fidelity, "sweep");
  }

  prepare_dir(out_dir);
  std::vector<std::string> columns = result.axis_names;
  for (const char* c : {"max_fidelity", "optimized_fidelity", "optimized_durations_s", "optimizer_converged",
                        "best_equal_fidelity", "optimal_t_mon_s"}) {
    columns.emplace_back(c);
  }
  TableWriter table(out_dir / "sweep.csv", provenance("sweep", config), columns);
  for (const auto& r : result.records) {
    TableWriter::Row row;
    for (double c : r.coords) row << c;
    row << r.max_fidelity() << r.optimized_fidelity << join_numbers(r.optimized_durations) << r.optimizer_converged
        << r.best_equal_fidelity << r.optimal_t_mon;
    table.write(row);
  }
  table.close();
  return result;
}

// ---------------------------------------------------------------------------

struct OracleSummary {
  mbqc::Lambdas lambdas{};
  double symplectic_defect = 0.0;
  double fidelity_to_ideal = 0.0;  // projective output vs infinite-squeezing reference
  std::vector<double> nullifiers;
  Matrix output_cov;
  Matrix ideal_cov;
};

/// Projective model only. oracle.csv (scalar report), output_cov.csv
/// (projective vs ideal output covariance) and nullifiers.csv (linear
/// cluster of n_resonators nodes).
inline OracleSummary cmd_oracle(const ExperimentConfig& config, const fs::path& out_dir) {
  OracleSummary s;
  const double r_db = config.params.r_cluster_db;
  const auto input =
      gaussian::squeeze_momentum(gaussian::vacuum(1), 0, config.input_squeezing_db.value_or(r_db));
  if (const auto* p = std::get_if<mbqc::SingleModeProgram>(&config.program)) {
    s.lambdas = p->lambdas;
    const auto m = mbqc::lambdas_to_symplectic(s.lambdas);
    s.symplectic_defect = gaussian::SymplecticMatrix::symplectic_defect(m.matrix());
    s.output_cov = mbqc::run_projective_mbqc(input, s.lambdas, r_db).cov();
    s.ideal_cov = mbqc::expected_output(m, input.cov());
  } else {
    const double w = std::get<mbqc::CzProgram>(config.program).weight;
    s.symplectic_defect = gaussian::SymplecticMatrix::symplectic_defect(gaussian::cz_symplectic(2, 0, 1, w).matrix());
    s.output_cov = mbqc::run_projective_cz(input, input, r_db, w).cov();
    s.ideal_cov = mbqc::expected_cz_output(input, input, w);
  }
  s.fidelity_to_ideal = gaussian::fidelity(gaussian::GaussianState(s.output_cov), gaussian::GaussianState(s.ideal_cov));
  require_fidelity(s.fidelity_to_ideal, "oracle");
  const auto graph = gaussian::GraphSpec::linear(config.params.n_resonators);
  s.nullifiers = gaussian::nullifier_variances(gaussian::build_cluster(graph, r_db), graph);

  prepare_dir(out_dir);
  const auto prov = provenance("oracle", config);
  TableWriter report(out_dir / "oracle.csv", prov, {"quantity", "value"});
  if (!config.is_cz()) {
    for (std::size_t i = 0; i < 4; ++i) report.write(TableWriter::Row() << "lambda" + std::to_string(i + 1) << s.lambdas[i]);
  }
  report.write(TableWriter::Row() << "symplectic_defect" << s.symplectic_defect);
  report.write(TableWriter::Row() << "r_cluster_db" << r_db);
  report.write(TableWriter::Row() << "fidelity_to_ideal" << s.fidelity_to_ideal);
  report.close();

  TableWriter cov(out_dir / "output_cov.csv", prov, {"row", "col", "projective", "ideal"});
  for (Eigen::Index i = 0; i < s.output_cov.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.output_cov.cols(); ++j) {
      cov.write(TableWriter::Row() << static_cast<std::size_t>(i) << static_cast<std::size_t>(j) << s.output_cov(i, j)
                                   << s.ideal_cov(i, j));
    }
  }
  cov.close();

  TableWriter nul(out_dir / "nullifiers.csv", prov, {"node", "variance", "ideal_finite_squeezing"});
  const double expect = 0.5 * std::exp(-2.0 * gaussian::db_to_r(r_db));
  for (std::size_t j = 0; j < s.nullifiers.size(); ++j) nul.write(TableWriter::Row() << j << s.nullifiers[j] << expect);
  nul.close();
  return s;
}

}  // namespace mechcluster::harness
