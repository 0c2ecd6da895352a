#pragma once

// Experiment configuration. The JSON layout is published in
// docs/config.schema.json; load_config enforces the same rules and reports the
// JSON pointer of the first violation.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nape/coefficients.hpp"
#include "nape/evolution.hpp"
#include "nape/lyapunov.hpp"

namespace nape {

struct Numerics {
  double R = 8.0;
  double h = 0.05;
  double dt = 1e-3;
  double theta = 1.0;
  Convection convection = Convection::hybrid;
};

/// Optional closed-form reference: the field is OU with these t-only data.
struct OUReference {
  std::string a, f, q;
};

struct LyapunovBlock {
  std::string W;
  double R0 = 0.0;
  std::optional<double> lambda;
  std::optional<double> a, cc;
  std::optional<PowerG> g;
  struct LogDrift {
    double c = 1.0, gamma = 2.0, R0 = 2.0;
  };
  std::optional<LogDrift> log_drift;
  std::map<std::string, bool> expect;  // condition name -> expected acceptance

  LyapunovData data() const;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"validate", "lyapunov", "solve", "kernel", "tightness",
                                                 "measures", "spectrum", "decay",  "mc"};
  return names;
}

struct ExperimentConfig {
  std::string name;
  CoefficientField field;
  std::vector<std::vector<std::string>> diffusion_src;
  std::vector<std::string> drift_src;
  Numerics numerics;
  std::optional<OUReference> ou_reference;
  std::optional<LyapunovBlock> lyapunov;
  /// Per-experiment parameters, keyed by experiment name; absent = disabled.
  std::map<std::string, nlohmann::json> experiments;
  std::string output_dir = "out";
  nlohmann::json source;  // config echo

  bool enabled(const std::string& e) const { return experiments.count(e) != 0; }
  /// Parameter with a default.
  template <class T>
  T param(const std::string& experiment, const std::string& key, const T& fallback) const {
    const auto it = experiments.find(experiment);
    if (it == experiments.end() || !it->second.contains(key)) return fallback;
    return it->second.at(key).get<T>();
  }
};

/// Throws ConfigError (with a JSON pointer) for schema violations and for
/// expressions that fail to parse (the parser offset is kept in the message).
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Halves h and quarters dt `times` times.
void refine(ExperimentConfig& c, int times);

}  // namespace nape
