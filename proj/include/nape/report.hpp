#pragma once

// Run reports, CSV tables and SVG line plots.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nape {

enum class Relation { at_most, at_least, within };

/// A measured value tested against a tolerance. `within` means
/// |value - target| <= tolerance.
struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  Relation relation = Relation::at_most;
  double target = 0.0;
  bool pass = false;

  static Check at_most(std::string name, double value, double bound);
  static Check at_least(std::string name, double value, double bound);
  static Check within(std::string name, double value, double target, double tolerance);
  /// Pass/fail outcome without a numeric margin; value is 1 or 0.
  static Check flag(std::string name, bool ok);
};

struct ExperimentResult {
  std::string name;
  std::vector<Check> checks;
  /// Informational numbers (no tolerance), e.g. fitted rates or radii.
  nlohmann::json values = nlohmann::json::object();
  /// Classification outcomes such as TIGHT / NON-TIGHT.
  std::optional<std::string> classification;
  std::vector<std::string> artifacts;  // relative to the output directory
  std::optional<std::string> error;    // set when the experiment aborted
  int exit_code = 0;                   // 0 pass, 1 check failed, 3 numerical failure
  double seconds = 0.0;                // kept out of report.json

  bool passed() const;
  nlohmann::json to_json() const;
};

struct RunReport {
  nlohmann::json config;
  std::string subcommand;
  std::uint64_t seed = 0;
  int refine = 0;
  std::vector<ExperimentResult> experiments;

  /// 0 when every experiment passed, 3 when any experiment aborted with a
  /// numerical failure, 1 otherwise.
  int exit_code() const;
  /// Deterministic: no wall-clock data.
  nlohmann::json to_json() const;
  nlohmann::json timing_json() const;
};

const char* library_version();

/// Writes `columns` (all of equal length) with a header row; values use
/// the shortest round-trip representation.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct PlotSpec {
  std::string title, xlabel, ylabel;
  bool log_y = false;
};

/// Minimal SVG line plot. Non-finite points (and nonpositive ones on a log
/// axis) are skipped.
void write_svg_plot(const std::filesystem::path& path, const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace nape
