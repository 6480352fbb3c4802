#pragma once

#include "fairsep/learner.hpp"
#include "fairsep/notions.hpp"
#include "fairsep/privilege.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fairsep {

namespace fs = std::filesystem;

enum class ExitCode : int { Ok = 0, AuditFail = 1, Usage = 2, Runtime = 3 };

struct ReportRun {
  std::string label;
  fs::path dir;  // output directory of a `train` run
};

struct PlotToggles {
  bool category_bars = true;
  bool subgroup_panels = true;
  bool effort_ratio = true;
};

/// One run, fully described. Relative paths resolve against the working
/// directory.
struct RunConfig {
  fs::path data;
  fs::path schema;
  fs::path out = "out";
  std::uint64_t seed = 42;  // propagated to the split, learner and extraction

  std::optional<NotionConfig> notion;

  // audit: exactly one prediction source
  fs::path predictions;
  fs::path model;
  bool use_labels = false;

  // train
  ReductionParams learner;
  double test_fraction = 0.3;
  bool include_protected = false;
  bool unconstrained = false;  // ignore `notion` while training (baseline runs)

  ExtractionOptions extraction;
  SweepOptions sweep;

  // report
  std::vector<ReportRun> runs;
  std::string category_column;  // defaults to the notion's conditional column
  std::vector<double> effort_edges = {30, 40, 45, 50, 60};
  RateOptions report_rates;
  PlotToggles plots;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load(const fs::path& path);
};

/// Command-line values that win over the config file.
struct Overrides {
  std::optional<fs::path> data, schema, out, predictions, model;
  std::optional<std::string> notion;
  std::optional<double> p, epsilon;
  std::optional<std::uint64_t> seed;
};

RunConfig apply(RunConfig cfg, const Overrides& o);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

/// Files a command wrote, relative to the output directory.
struct CommandOutput {
  ExitCode code = ExitCode::Ok;
  std::vector<std::string> files;
  std::string message;
};

CommandOutput cmd_audit(const RunConfig& cfg);
CommandOutput cmd_train(const RunConfig& cfg);
CommandOutput cmd_extract_privilege(const RunConfig& cfg);
CommandOutput cmd_sweep_p(const RunConfig& cfg);
CommandOutput cmd_report(const RunConfig& cfg);

/// Merges entries for `files` into <out>/run_manifest.json (sorted by path).
void update_manifest(const fs::path& out, const std::string& command, const RunConfig& cfg,
                     const std::vector<std::string>& files);

/// Dispatches by name, records the manifest and maps exceptions onto exit
/// codes; diagnostics go to `err`.
ExitCode run_command(const std::string& command, const RunConfig& cfg, std::ostream& err);

}  // namespace fairsep
