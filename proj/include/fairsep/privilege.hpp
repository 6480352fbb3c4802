#pragma once

#include "fairsep/dataset.hpp"
#include "fairsep/learner.hpp"
#include "fairsep/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fairsep {

// Privilege-source extraction ---------------------------------------------------

struct Importance {
  std::string column;
  double mean = 0.0;  // mean accuracy drop over repeats
  double sd = 0.0;    // sample standard deviation of the drops
  std::vector<double> drops;
  int rank = 0;  // 1-based
};

struct ImportanceTable {
  std::string protected_column;
  std::string group;
  double baseline_accuracy = 0.0;
  std::size_t fit_rows = 0;
  std::size_t holdout_rows = 0;
  int repeats = 0;
  std::uint64_t seed = 0;
  std::vector<Importance> rows;  // ordered by rank
  std::string chosen;
  bool tie = false;  // the top two were tied on mean drop
  std::vector<std::string> warnings;

  const Importance* find(const std::string& column) const;
  nlohmann::json to_json() const;
  void write_csv(std::ostream& out) const;
};

struct ExtractionOptions {
  std::string group;  // level of the protected column whose rows are used
  int repeats = 10;
  double holdout = 0.25;
  std::uint64_t seed = 42;
  bool exclude_effort = false;
  BaseParams base;

  nlohmann::json to_json() const;
  static ExtractionOptions from_json(const nlohmann::json& doc);
};

/// Hard 0/1 predictions for every row of a table.
using Predictor = std::function<VecXd(const Table&)>;

/// Accuracy drop per candidate when its values are shuffled in `holdout`.
/// Repeat r uses one permutation (seeded with seed + r) for every column, so
/// columns are compared on identical shuffles. Throws DegenerateError when the
/// predictor is constant on the holdout.
ImportanceTable permutation_importance(const Table& holdout, const std::vector<std::string>& candidates,
                                       const Predictor& predict, int repeats, std::uint64_t seed);

/// Numerical and ordinal columns that are neither protected nor the target
/// (nor the effort column when `exclude_effort`).
std::vector<std::string> privilege_candidates(const Table& t, bool exclude_effort);

/// Fits a logistic model on the rows of group `options.group` only, then ranks
/// the candidates by permutation importance on a stratified holdout slice of
/// those rows. The top-ranked column is the suggested privilege source.
ImportanceTable extract_privilege_attribute(const Table& t, const ExtractionOptions& options);

// Privilege-threshold sweep ---------------------------------------------------------

struct SweepRow {
  double p = 0.0;
  double tau = 0.0;
  double realized_fraction = 0.0;
  std::map<std::string, Eigen::Index> support;  // rows per group in the top slice
  std::map<std::string, double> ppr;            // ground-truth PPR per group in the slice
  std::optional<double> ratio;                  // nullopt: undefined at this p
  bool satisfies = false;
  std::string note;
};

struct PSweepResult {
  std::string column;
  std::string protected_column;
  std::string advantaged;
  double ratio_rule = 0.8;
  std::vector<SweepRow> rows;
  std::vector<double> satisfying;
  std::optional<double> selected;  // nullopt: no p satisfies the rule

  nlohmann::json to_json() const;
  void write_csv(std::ostream& out) const;
};

struct SweepOptions {
  std::vector<double> grid;
  double ratio_rule = 0.8;
  std::string column;      // defaults to the privilege-tagged column
  std::string advantaged;  // defaults to the group with the higher overall PPR

  nlohmann::json to_json() const;
  static SweepOptions from_json(const nlohmann::json& doc);
};

/// For every p: restrict to the top-p% slice of the column and compare the
/// ground-truth PPR of each group with that of the advantaged group (worst
/// ratio over groups). Selects the smallest p whose ratio meets the rule.
PSweepResult select_p(const Table& t, const SweepOptions& options);

}  // namespace fairsep
