// mechcluster: run monitoring-protocol experiments from a YAML config.
//
//   mechcluster simulate --config run.yaml --out out/run
//   mechcluster sweep --config contour.yaml --workers 4
//   mechcluster optimize --preset set1 --out out/opt
//   mechcluster oracle --config gate.yaml
//
// Exit codes: 0 success, 2 config error, 3 numerical failure.

#include "mechcluster/harness/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <thread>

namespace {

using namespace mechcluster;
using namespace mechcluster::harness;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int report(const std::string& kind, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-monitoring MBQC on optomechanical clusters", "mechcluster"};
  app.set_version_flag("--version", std::string(MECHCLUSTER_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;  // empty: output.dir from the config
  std::string preset;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "YAML experiment config");
    sub->add_option("--out", out_dir, "output directory (default: output.dir from the config)");
    sub->add_option("--preset", preset, "parameter preset, overrides the config")->check(CLI::IsMember({"set1", "set2"}));
  };
  auto* simulate = app.add_subcommand("simulate", "run one protocol and write its fidelity trace");
  auto* sweep = app.add_subcommand("sweep", "evaluate the configured parameter grid");
  auto* optimize = app.add_subcommand("optimize", "optimise per-step monitoring times");
  auto* oracle = app.add_subcommand("oracle", "projective-measurement reference outputs");
  for (auto* sub : {simulate, sweep, optimize, oracle}) add_common(sub);
  sweep->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), kExitConfig);
  }

  try {
    const std::optional<std::string> preset_override = preset.empty() ? std::nullopt : std::optional(preset);
    ExperimentConfig config;
    if (!config_path.empty()) {
      config = load_config(config_path, preset_override);
    } else if (preset_override) {
      config = parse_config("", preset_override);
    } else {
      throw ConfigError("", "need --config or --preset");
    }
    const std::filesystem::path out = out_dir.empty() ? config.out_dir : out_dir;

    if (simulate->parsed()) {
      const auto s = cmd_simulate(config, out);
      std::cout << "final_fidelity " << format_number(s.final_fidelity) << "\n";
    } else if (sweep->parsed()) {
      const auto r = cmd_sweep(config, out, workers);
      std::cout << "grid_points " << r.records.size() << "\n";
    } else if (optimize->parsed()) {
      const auto s = cmd_optimize(config, out);
      std::cout << "durations_s " << join_numbers(s.optimized.schedule.durations) << "\n"
                << "optimized_fidelity " << format_number(s.optimized.final_fidelity) << "\n";
    } else {
      const auto s = cmd_oracle(config, out);
      std::cout << "fidelity_to_ideal " << format_number(s.fidelity_to_ideal) << "\n";
    }
    std::cout << "config_hash " << config_hash(config) << "\n";
  } catch (const ConfigError& e) {
    std::cerr << e.to_json().dump() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    return report("numerical", e.what(), kExitNumerical);
  } catch (const mbqc::DecompositionError& e) {
    return report("numerical", e.what(), kExitNumerical);
  } catch (const std::exception& e) {
    return report("runtime", e.what(), kExitNumerical);
  }
  return 0;
}
