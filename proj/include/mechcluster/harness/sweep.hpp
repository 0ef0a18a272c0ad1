#pragma once

// Parameter sweeps over a Cartesian grid. Each grid point is an independent
// job; a bounded pool of threads claims jobs through an atomic counter and
// writes into its own pre-sized slot, so the table comes out in grid order
// whatever the worker count.

#include "mechcluster/harness/config.hpp"
#include "mechcluster/optomech.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace mechcluster::harness {

struct SweepRecord {
  std::vector<double> coords;  // one per axis, in axis order
  double optimized_fidelity = -1.0;  // -1: not computed
  std::vector<double> optimized_durations;
  bool optimizer_converged = true;
  double best_equal_fidelity = -1.0;
  double optimal_t_mon = 0.0;

  [[nodiscard]] double max_fidelity() const { return std::max(optimized_fidelity, best_equal_fidelity); }
};

struct SweepResult {
  std::vector<std::string> axis_names;
  std::vector<SweepRecord> records;
  std::string config_hash;
};

/// Row-major grid (last axis varies fastest).
inline std::vector<std::vector<double>> grid_points(const std::vector<SweepAxis>& axes) {
  std::vector<std::vector<double>> out{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<double>> next;
    const auto values = axis.range.values();
    for (const auto& prefix : out) {
      for (double v : values) {
        next.push_back(prefix);
        next.back().push_back(v);
      }
    }
    out = std::move(next);
  }
  return out;
}

/// Runs job(i) for i in [0, n) on at most `workers` threads. The first
/// exception (lowest index) is rethrown after all threads have joined.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline SweepRecord evaluate_point(const ExperimentConfig& config, const ParamValues& values) {
  SweepRecord rec;
  const auto plan = config.plan_for(values);
  const auto params = values.physical();
  auto options = config.protocol_options();
  if (config.sweep.optimize) {
    const auto opt = optomech::optimize_schedule(plan, params, config.optimizer(), options);
    rec.optimized_fidelity = opt.final_fidelity;
    rec.optimized_durations = opt.schedule.durations;
    rec.optimizer_converged = opt.converged();
  }
  if (config.sweep.t_mon_scan.points > 0) {
    const auto t_mons = config.sweep.t_mon_scan.values();
    const auto scan = optomech::equal_step_scan(plan, params, t_mons, options);
    for (const auto& p : scan) {
      if (p.final_fidelity > rec.best_equal_fidelity) {
        rec.best_equal_fidelity = p.final_fidelity;
        rec.optimal_t_mon = p.t_mon;
      }
    }
  }
  return rec;
}

inline SweepResult run_sweep(const ExperimentConfig& config, std::size_t workers) {
  if (config.sweep.axes.empty()) throw ConfigError("sweep.axes", "a sweep needs at least one axis");
  if (!config.sweep.optimize && config.sweep.t_mon_scan.points == 0) {
    throw ConfigError("sweep", "nothing to compute: enable optimize or give t_mon_scan points");
  }
  SweepResult result;
  result.config_hash = config_hash(config);
  for (const auto& a : config.sweep.axes) result.axis_names.push_back(a.name);
  const auto points = grid_points(config.sweep.axes);
  result.records.resize(points.size());
  parallel_for(points.size(), workers, [&](std::size_t i) {
    ParamValues values = config.params;
    for (std::size_t k = 0; k < points[i].size(); ++k) values.at(result.axis_names[k]) = points[i][k];
    SweepRecord rec = evaluate_point(config, values);
    rec.coords = points[i];
    result.records[i] = std::move(rec);
  });
  return result;
}

}  // namespace mechcluster::harness
