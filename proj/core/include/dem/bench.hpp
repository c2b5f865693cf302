#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dem/scenes.hpp"
#include "dem/timestepping.hpp"

namespace dem {

inline constexpr int kReportVersion = 1;

struct RunConfig {
  SceneSpec scene;
  StepConfig step;
  FitParams fit;
  int n_steps = 100;
  /// Replaces scene.seed when set.
  std::uint64_t seed = 1;
  bool validate_trees = true;
  int validation_samples = 10;  ///< per mesh triangle

  /// Throws InvalidSpec.
  void validate() const;
};

/// Strict parser; unknown keys throw InvalidSpec. Sections: "scene", "step",
/// "kernel", "force", "fit", plus "n_steps", "seed", "validate_trees",
/// "validation_samples".
RunConfig parse_run_config(const std::string& json);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" assignments to a JSON document and returns it.
/// Values are taken as JSON when they parse, as strings otherwise; missing
/// objects along the path are created. Throws InvalidSpec.
std::string apply_overrides(const std::string& json, const std::vector<std::string>& assignments);

struct StepRecord {
  int step = 0;
  Real time = 0;
  KernelCounters counters;
  std::vector<std::uint64_t> level_checks;  ///< index = surrogate level
  std::vector<std::uint64_t> sweep_checks;  ///< triangle checks per Picard sweep
  int picard_iterations = 0;
  std::size_t merged_contacts = 0;
  std::size_t raw_contacts = 0;
  std::size_t candidate_pairs = 0;
  std::size_t active_set_changes = 0;

  std::uint64_t checks() const { return counters.checks(); }
  /// Fraction of iterative invocations that fell back to the comparison
  /// kernel; 0 without iterative invocations.
  Real fallback_rate() const;
};

struct RunTotals {
  KernelCounters counters;
  std::vector<std::uint64_t> level_checks;
  std::uint64_t checks = 0;
  std::uint64_t contact_checks = 0;  ///< summed over steps with merged contacts
  int contact_steps = 0;
  std::uint64_t picard_iterations = 0;
  Real mean_picard_iterations = 0;  ///< over implicit steps; 0 for explicit modes
  std::size_t merged_contacts = 0;
  Real fallback_rate = 0;
};

struct RunReport {
  int version = kReportVersion;
  RunConfig config;
  std::vector<StepRecord> steps;
  RunTotals totals;
  std::size_t particles = 0;
  std::vector<std::size_t> triangles;  ///< per particle
  bool ok = true;
  int failed_step = -1;  ///< index of the step that raised, when !ok
  std::string error;
  double wall_time_s = 0;  ///< informational only
};

using StepObserver = std::function<void(const System&, const StepRecord&)>;

/// Builds the scene, optionally validates every distinct tree, runs
/// n_steps. PicardDiverged and tree validation failures end the run with
/// ok = false. Throws InvalidSpec for bad configs.
RunReport run(const RunConfig& config, const StepObserver& observer = {});

/// Totals recomputed from the step records.
RunTotals totals_of(const std::vector<StepRecord>& steps, StepMode mode);

/// Versioned JSON. Wall time is only written when `include_wall_time`.
std::string report_to_json(const RunReport& report, bool include_wall_time = true);
/// Throws SchemaMismatch for other versions or malformed documents.
RunReport report_from_json(const std::string& json);
/// One row per step; per-level and per-sweep columns are ';'-joined lists.
std::string report_to_csv(const RunReport& report);

struct ReportComparison {
  /// (name, b / a); NaN when a is zero and b is not, 1 when both are zero.
  std::vector<std::pair<std::string, double>> ratios;
  double ratio(const std::string& name) const;
};

/// Ratios of the aggregate counters of `b` over `a`. Throws SchemaMismatch
/// when versions or scene kinds differ.
ReportComparison compare_reports(const RunReport& a, const RunReport& b);
std::string comparison_to_json(const ReportComparison& c);

}  // namespace dem
