#pragma once

// Experiment configuration: YAML in, validated ExperimentConfig out.
//
// Physical quantities carry their unit in the key name. Rates that are
// conventionally quoted as ordinary frequencies are stored divided by 2 pi
// (gamma_over_2pi_hz); everything else is already angular.

#include "mechcluster/mbqc.hpp"
#include "mechcluster/optomech.hpp"

#include <json.hpp>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mechcluster::harness {

/// Anything wrong with the user's configuration. `key` is a dotted path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)), message_(message) {}

  [[nodiscard]] const std::string& key() const { return key_; }
  [[nodiscard]] const std::string& message() const { return message_; }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"error", "config"}, {"key", key_}, {"message", message_}};
  }

 private:
  std::string key_;
  std::string message_;
};

/// PhysicalParams in configuration units.
struct ParamValues {
  double efficiency = 1.0;
  double gamma_over_2pi_hz = 0.0;
  double kappa_over_2pi_hz = 0.0;
  double tau_over_kappa = 0.0;
  double coupling_rad_per_s = 0.0;
  double temperature_k = 0.0;
  double r_post_meas_db = 20.0;
  double r_cluster_db = 3.0;
  double mech_frequency_over_2pi_hz = 11e6;  // resonator j sits at (j + 1) times this
  std::size_t n_resonators = 5;

  static ParamValues set1() {
    ParamValues v;
    v.efficiency = 0.99;
    v.gamma_over_2pi_hz = 8.0;
    v.kappa_over_2pi_hz = 0.33e6;
    v.tau_over_kappa = 0.01;
    v.coupling_rad_per_s = 0.35e6;
    v.temperature_k = 1e-3;
    v.r_post_meas_db = 10.0;
    v.r_cluster_db = 3.0;
    return v;
  }

  static ParamValues set2() {
    ParamValues v;
    v.efficiency = 1.0;
    v.gamma_over_2pi_hz = 0.0;
    v.kappa_over_2pi_hz = 0.1e6;
    v.tau_over_kappa = 0.0;
    v.coupling_rad_per_s = 0.35e6;
    v.temperature_k = 0.0;
    v.r_post_meas_db = 20.0;
    v.r_cluster_db = 3.0;
    return v;
  }

  static ParamValues preset(const std::string& name) {
    if (name == "set1") return set1();
    if (name == "set2") return set2();
    throw ConfigError("preset", "unknown preset '" + name + "' (expected set1 or set2)");
  }

  /// Names usable as sweep axes.
  static const std::vector<std::string>& names() {
    static const std::vector<std::string> n = {
        "efficiency",     "gamma_over_2pi_hz", "kappa_over_2pi_hz", "tau_over_kappa",
        "coupling_rad_per_s", "temperature_k", "r_post_meas_db",    "r_cluster_db",
        "mech_frequency_over_2pi_hz"};
    return n;
  }

  double& at(const std::string& name) {
    if (name == "efficiency") return efficiency;
    if (name == "gamma_over_2pi_hz") return gamma_over_2pi_hz;
    if (name == "kappa_over_2pi_hz") return kappa_over_2pi_hz;
    if (name == "tau_over_kappa") return tau_over_kappa;
    if (name == "coupling_rad_per_s") return coupling_rad_per_s;
    if (name == "temperature_k") return temperature_k;
    if (name == "r_post_meas_db") return r_post_meas_db;
    if (name == "r_cluster_db") return r_cluster_db;
    if (name == "mech_frequency_over_2pi_hz") return mech_frequency_over_2pi_hz;
    throw ConfigError("params", "unknown parameter '" + name + "'");
  }

  [[nodiscard]] double get(const std::string& name) const { return const_cast<ParamValues*>(this)->at(name); }

  [[nodiscard]] optomech::PhysicalParams physical() const {
    optomech::PhysicalParams p;
    p.efficiency = efficiency;
    p.gamma = 2.0 * kPi * gamma_over_2pi_hz;
    p.kappa = 2.0 * kPi * kappa_over_2pi_hz;
    p.tau = tau_over_kappa * p.kappa;
    p.coupling = coupling_rad_per_s;
    p.temperature = temperature_k;
    p.r_post_meas_db = r_post_meas_db;
    p.r_cluster_db = r_cluster_db;
    p.mech_frequencies = optomech::harmonic_frequencies(n_resonators, mech_frequency_over_2pi_hz);
    return p;
  }
};

enum class ScheduleMode { equal, optimized, explicit_durations };

inline std::string to_string(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::equal: return "equal";
    case ScheduleMode::optimized: return "optimized";
    case ScheduleMode::explicit_durations: return "explicit";
  }
  return "?";
}

struct ScheduleConfig {
  ScheduleMode mode = ScheduleMode::equal;
  double t_mon_s = 100e-6;
  std::vector<double> durations_s;
  double time_resolution_s = 0.1e-6;
  double max_duration_s = 400e-6;
};

struct AxisRange {
  double min = 0.0;
  double max = 0.0;
  std::size_t points = 1;
  bool log_scale = false;

  [[nodiscard]] std::vector<double> values() const {
    std::vector<double> out(points);
    for (std::size_t i = 0; i < points; ++i) {
      const double u = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
      out[i] = log_scale ? min * std::pow(max / min, u) : min + (max - min) * u;
    }
    // Pin the end point exactly; pow and the linear form both drift by an ulp.
    if (points > 1) out.back() = max;
    return out;
  }
};

struct SweepAxis {
  std::string name;
  AxisRange range;
};

struct SweepConfig {
  std::vector<SweepAxis> axes;
  // Equal-step scan used for the optimal t_mon column; points = 0 disables it.
  AxisRange t_mon_scan{10e-6, 400e-6, 0, true};
  bool optimize = true;
};

struct ExperimentConfig {
  std::optional<std::string> preset;
  ParamValues params;
  std::string gate = "S(1)";
  mbqc::GateProgram program = mbqc::SingleModeProgram{{1.0, 0.0, 0.0, 0.0}};
  std::optional<double> input_squeezing_db;  // default: r_cluster_db
  ScheduleConfig schedule;
  bool reset_cavity = false;
  std::size_t samples_per_step = 100;
  double max_dt_s = 0.0;  // 0: chosen from the fastest rate
  SweepConfig sweep;
  std::string out_dir = "out";

  [[nodiscard]] bool is_cz() const { return std::holds_alternative<mbqc::CzProgram>(program); }

  [[nodiscard]] std::size_t n_steps() const { return is_cz() ? 2 : 4; }

  [[nodiscard]] optomech::ProtocolOptions protocol_options() const {
    optomech::ProtocolOptions o;
    o.reset_cavity = reset_cavity;
    o.samples_per_step = samples_per_step;
    o.max_dt = max_dt_s;
    return o;
  }

  [[nodiscard]] optomech::MonitoringSchedule fixed_schedule() const {
    if (schedule.mode == ScheduleMode::explicit_durations) return {schedule.durations_s};
    return optomech::MonitoringSchedule::equal(n_steps(), schedule.t_mon_s);
  }

  [[nodiscard]] optomech::OptimizerConfig optimizer() const {
    return {schedule.time_resolution_s, schedule.max_duration_s};
  }

  [[nodiscard]] mbqc::MeasurementPlan plan_for(const ParamValues& values) const {
    const double in_db = input_squeezing_db.value_or(values.r_cluster_db);
    const auto input = gaussian::squeeze_momentum(gaussian::vacuum(1), 0, in_db);
    return optomech::plan_for(input, program, values.physical());
  }

  [[nodiscard]] mbqc::MeasurementPlan plan() const { return plan_for(params); }
};

// ---------------------------------------------------------------------------
// Gate strings: I, F, S(<lambda>), CZ, CZ(<weight>).

inline mbqc::GateProgram parse_gate(const std::string& text) {
  static const std::regex shear(R"(\s*S\(\s*([-+0-9.eE]+)\s*\)\s*)");
  static const std::regex cz(R"(\s*CZ(?:\(\s*([-+0-9.eE]+)\s*\))?\s*)");
  std::smatch m;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || !std::isfinite(v)) throw ConfigError("gate", "bad number '" + s + "'");
    return v;
  };
  if (text == "I") return mbqc::SingleModeProgram{mbqc::to_lambdas(mbqc::Identity{})};
  if (text == "F") return mbqc::SingleModeProgram{mbqc::to_lambdas(mbqc::Fourier{})};
  if (std::regex_match(text, m, shear)) return mbqc::SingleModeProgram{mbqc::to_lambdas(mbqc::Shear{number(m[1])})};
  if (std::regex_match(text, m, cz)) return mbqc::CzProgram{m[1].matched ? number(m[1]) : 1.0};
  throw ConfigError("gate", "unknown gate '" + text + "' (expected I, F, S(l), CZ or a lambdas list)");
}

// ---------------------------------------------------------------------------
// YAML parsing

namespace detail {

inline void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError(where, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError(key, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(key, "cannot parse '" + node.Scalar() + "'");
  }
}

inline double number(const YAML::Node& node, const std::string& key) {
  const double v = scalar<double>(node, key);
  if (!std::isfinite(v)) throw ConfigError(key, "must be finite");
  return v;
}

inline std::size_t count(const YAML::Node& node, const std::string& key) {
  const long v = scalar<long>(node, key);
  if (v < 0) throw ConfigError(key, "must be non-negative");
  return static_cast<std::size_t>(v);
}

inline AxisRange parse_range(const YAML::Node& node, const std::string& where) {
  check_keys(node, where, {"name", "min", "max", "points", "scale"});
  for (const char* k : {"min", "max", "points"}) {
    if (!node[k]) throw ConfigError(where + "." + k, "required");
  }
  AxisRange r;
  r.min = number(node["min"], where + ".min");
  r.max = number(node["max"], where + ".max");
  r.points = count(node["points"], where + ".points");
  if (node["scale"]) {
    const auto s = scalar<std::string>(node["scale"], where + ".scale");
    if (s == "log") {
      r.log_scale = true;
    } else if (s != "linear") {
      throw ConfigError(where + ".scale", "expected linear or log");
    }
  }
  if (r.points == 0) throw ConfigError(where + ".points", "must be at least 1");
  if (r.max < r.min) throw ConfigError(where, "max < min");
  if (r.log_scale && !(r.min > 0.0)) throw ConfigError(where, "log scale needs min > 0");
  return r;
}

}  // namespace detail

/// Checks everything that can be checked without running the dynamics.
inline void validate(const ExperimentConfig& c) {
  try {
    c.params.physical().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("params", e.what());
  }
  if (c.params.n_resonators < 5) throw ConfigError("params.n_resonators", "the protocols need at least 5 resonators");
  if (c.samples_per_step == 0) throw ConfigError("protocol.samples_per_step", "must be at least 1");
  if (!(c.max_dt_s >= 0.0)) throw ConfigError("protocol.max_dt_s", "must be >= 0");
  const auto& s = c.schedule;
  if (s.mode == ScheduleMode::explicit_durations) {
    try {
      c.fixed_schedule().validate(c.n_steps());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("schedule.durations_s", e.what());
    }
  }
  if (!(s.t_mon_s > 0.0)) throw ConfigError("schedule.t_mon_s", "must be positive");
  if (!(s.time_resolution_s > 0.0)) throw ConfigError("schedule.time_resolution_s", "must be positive");
  if (!(s.max_duration_s >= s.time_resolution_s)) {
    throw ConfigError("schedule.max_duration_s", "must be at least time_resolution_s");
  }
  if (c.input_squeezing_db && !(*c.input_squeezing_db >= 0.0)) throw ConfigError("input.squeezing_db", "must be >= 0");
  std::set<std::string> seen;
  for (const auto& axis : c.sweep.axes) {
    const auto& names = ParamValues::names();
    if (std::find(names.begin(), names.end(), axis.name) == names.end()) {
      throw ConfigError("sweep.axes", "unknown parameter '" + axis.name + "'");
    }
    if (!seen.insert(axis.name).second) throw ConfigError("sweep.axes", "parameter '" + axis.name + "' swept twice");
    for (double v : axis.range.values()) {
      ParamValues p = c.params;
      p.at(axis.name) = v;
      try {
        p.physical().validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError("sweep.axes." + axis.name, e.what());
      }
    }
  }
}

/// Builds a config from parsed YAML. `preset_override` (the --preset flag)
/// replaces any preset named in the file; explicit params still apply on top.
inline ExperimentConfig from_yaml(const YAML::Node& root, const std::optional<std::string>& preset_override = {}) {
  using namespace detail;
  ExperimentConfig c;
  if (!root || root.IsNull()) {
    if (!preset_override) throw ConfigError("", "empty configuration");
  } else {
    check_keys(root, "", {"preset", "params", "gate", "input", "schedule", "protocol", "sweep", "output"});
  }
  const YAML::Node r = root && root.IsMap() ? root : YAML::Node(YAML::NodeType::Map);

  if (preset_override) {
    c.preset = *preset_override;
  } else if (r["preset"]) {
    c.preset = scalar<std::string>(r["preset"], "preset");
  }
  if (c.preset) {
    c.params = ParamValues::preset(*c.preset);
  } else if (!r["params"]) {
    throw ConfigError("params", "required when no preset is given");
  }

  if (const auto p = r["params"]) {
    std::set<std::string> allowed(ParamValues::names().begin(), ParamValues::names().end());
    allowed.insert("n_resonators");
    check_keys(p, "params", allowed);
    if (!c.preset && !p["kappa_over_2pi_hz"]) throw ConfigError("params.kappa_over_2pi_hz", "required without a preset");
    for (const auto& name : ParamValues::names()) {
      if (p[name]) c.params.at(name) = number(p[name], "params." + name);
    }
    if (p["n_resonators"]) c.params.n_resonators = count(p["n_resonators"], "params.n_resonators");
  }

  if (const auto g = r["gate"]) {
    if (g.IsScalar()) {
      c.gate = g.Scalar();
      c.program = parse_gate(c.gate);
    } else {
      check_keys(g, "gate", {"lambdas"});
      const auto l = g["lambdas"];
      if (!l || !l.IsSequence() || l.size() != 4) throw ConfigError("gate.lambdas", "expected a list of 4 numbers");
      mbqc::Lambdas lambdas{};
      for (std::size_t i = 0; i < 4; ++i) lambdas[i] = number(l[i], "gate.lambdas");
      c.program = mbqc::SingleModeProgram{lambdas};
      char buf[128];
      std::snprintf(buf, sizeof buf, "L(%.17g,%.17g,%.17g,%.17g)", lambdas[0], lambdas[1], lambdas[2], lambdas[3]);
      c.gate = buf;
    }
  }

  if (const auto in = r["input"]) {
    check_keys(in, "input", {"squeezing_db"});
    if (in["squeezing_db"]) c.input_squeezing_db = number(in["squeezing_db"], "input.squeezing_db");
  }

  if (const auto s = r["schedule"]) {
    check_keys(s, "schedule", {"mode", "t_mon_s", "durations_s", "time_resolution_s", "max_duration_s"});
    if (s["mode"]) {
      const auto m = scalar<std::string>(s["mode"], "schedule.mode");
      if (m == "equal") {
        c.schedule.mode = ScheduleMode::equal;
      } else if (m == "optimized") {
        c.schedule.mode = ScheduleMode::optimized;
      } else if (m == "explicit") {
        c.schedule.mode = ScheduleMode::explicit_durations;
      } else {
        throw ConfigError("schedule.mode", "expected equal, optimized or explicit");
      }
    }
    if (s["t_mon_s"]) c.schedule.t_mon_s = number(s["t_mon_s"], "schedule.t_mon_s");
    if (s["durations_s"]) {
      if (!s["durations_s"].IsSequence()) throw ConfigError("schedule.durations_s", "expected a list");
      for (const auto& d : s["durations_s"]) c.schedule.durations_s.push_back(number(d, "schedule.durations_s"));
    }
    if (s["time_resolution_s"]) c.schedule.time_resolution_s = number(s["time_resolution_s"], "schedule.time_resolution_s");
    if (s["max_duration_s"]) c.schedule.max_duration_s = number(s["max_duration_s"], "schedule.max_duration_s");
    if (c.schedule.mode == ScheduleMode::explicit_durations && !s["durations_s"]) {
      throw ConfigError("schedule.durations_s", "required in explicit mode");
    }
  }

  if (const auto p = r["protocol"]) {
    check_keys(p, "protocol", {"reset_cavity", "samples_per_step", "max_dt_s"});
    if (p["reset_cavity"]) c.reset_cavity = scalar<bool>(p["reset_cavity"], "protocol.reset_cavity");
    if (p["samples_per_step"]) c.samples_per_step = count(p["samples_per_step"], "protocol.samples_per_step");
    if (p["max_dt_s"]) c.max_dt_s = number(p["max_dt_s"], "protocol.max_dt_s");
  }

  if (const auto s = r["sweep"]) {
    check_keys(s, "sweep", {"axes", "t_mon_scan", "optimize"});
    if (s["axes"]) {
      if (!s["axes"].IsSequence()) throw ConfigError("sweep.axes", "expected a list");
      for (const auto& a : s["axes"]) {
        if (!a.IsMap() || !a["name"]) throw ConfigError("sweep.axes", "each axis needs a name");
        const auto name = scalar<std::string>(a["name"], "sweep.axes.name");
        c.sweep.axes.push_back({name, parse_range(a, "sweep.axes." + name)});
      }
    }
    if (s["t_mon_scan"]) c.sweep.t_mon_scan = parse_range(s["t_mon_scan"], "sweep.t_mon_scan");
    if (s["optimize"]) c.sweep.optimize = scalar<bool>(s["optimize"], "sweep.optimize");
  }

  if (const auto o = r["output"]) {
    check_keys(o, "output", {"dir"});
    if (o["dir"]) c.out_dir = scalar<std::string>(o["dir"], "output.dir");
  }

  validate(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& yaml_text,
                                     const std::optional<std::string>& preset_override = {}) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("YAML syntax error: ") + e.what());
  }
  return from_yaml(root, preset_override);
}

inline ExperimentConfig load_config(const std::string& path, const std::optional<std::string>& preset_override = {}) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("", "cannot read config file '" + path + "'");
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("YAML syntax error: ") + e.what());
  }
  return from_yaml(root, preset_override);
}

// ---------------------------------------------------------------------------
// Canonical form and hash

/// Resolved configuration as JSON. Output location and worker count are not
/// part of the experiment and are left out.
inline nlohmann::json canonical_json(const ExperimentConfig& c) {
  nlohmann::json params;
  for (const auto& name : ParamValues::names()) params[name] = c.params.get(name);
  params["n_resonators"] = c.params.n_resonators;

  nlohmann::json gate;
  if (const auto* p = std::get_if<mbqc::SingleModeProgram>(&c.program)) {
    gate = {{"kind", "single_mode"}, {"lambdas", std::vector<double>(p->lambdas.begin(), p->lambdas.end())}};
  } else {
    gate = {{"kind", "cz"}, {"weight", std::get<mbqc::CzProgram>(c.program).weight}};
  }

  nlohmann::json schedule = {{"mode", to_string(c.schedule.mode)},
                             {"t_mon_s", c.schedule.t_mon_s},
                             {"durations_s", c.schedule.durations_s},
                             {"time_resolution_s", c.schedule.time_resolution_s},
                             {"max_duration_s", c.schedule.max_duration_s}};

  auto range = [](const AxisRange& r) {
    return nlohmann::json{{"min", r.min}, {"max", r.max}, {"points", r.points}, {"log", r.log_scale}};
  };
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& a : c.sweep.axes) axes.push_back({{"name", a.name}, {"range", range(a.range)}});

  return {{"params", params},
          {"gate", gate},
          {"input_squeezing_db", c.input_squeezing_db.value_or(c.params.r_cluster_db)},
          {"schedule", schedule},
          {"protocol",
           {{"reset_cavity", c.reset_cavity}, {"samples_per_step", c.samples_per_step}, {"max_dt_s", c.max_dt_s}}},
          {"sweep", {{"axes", axes}, {"t_mon_scan", range(c.sweep.t_mon_scan)}, {"optimize", c.sweep.optimize}}}};
}

inline std::string sha256_hex(const std::string& data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256_hex: digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

inline std::string config_hash(const ExperimentConfig& c) { return sha256_hex(canonical_json(c).dump()); }

}  // namespace mechcluster::harness
