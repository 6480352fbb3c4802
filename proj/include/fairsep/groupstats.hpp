#pragma once

#include "fairsep/dataset.hpp"
#include "fairsep/types.hpp"

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace fairsep {

enum class Cmp { Ge, Lt };

struct EqualsClause {
  std::string column;
  std::string level;
};
struct LabelClause {
  int y = 1;
};
struct ThresholdClause {
  std::string column;
  Cmp cmp = Cmp::Ge;
  double value = 0.0;
};
/// Threshold that varies by row, e.g. an effort mean scoped to each row's group.
struct RowThresholdClause {
  std::string column;
  Cmp cmp = Cmp::Ge;
  VecXd per_row;
};

using Clause = std::variant<EqualsClause, LabelClause, ThresholdClause, RowThresholdClause>;

/// Conjunction of clauses. The empty predicate selects every row.
struct Predicate {
  std::vector<Clause> clauses;

  Predicate& equals(std::string column, std::string level) {
    clauses.emplace_back(EqualsClause{std::move(column), std::move(level)});
    return *this;
  }
  Predicate& label(int y) {
    clauses.emplace_back(LabelClause{y});
    return *this;
  }
  Predicate& at_least(std::string column, double value) {
    clauses.emplace_back(ThresholdClause{std::move(column), Cmp::Ge, value});
    return *this;
  }
  Predicate& below(std::string column, double value) {
    clauses.emplace_back(ThresholdClause{std::move(column), Cmp::Lt, value});
    return *this;
  }
  Predicate& at_least(std::string column, VecXd per_row) {
    clauses.emplace_back(RowThresholdClause{std::move(column), Cmp::Ge, std::move(per_row)});
    return *this;
  }
  Predicate& below(std::string column, VecXd per_row) {
    clauses.emplace_back(RowThresholdClause{std::move(column), Cmp::Lt, std::move(per_row)});
    return *this;
  }
};

Mask mask(const Table& t, const Predicate& pred);

enum class RateMode {
  Hard,      // indicator of score >= cutoff
  Expected,  // the score itself, read as P(h(x) = 1)
};

struct RateOptions {
  RateMode mode = RateMode::Hard;
  double cutoff = 0.5;
};

std::string to_string(RateMode mode);
RateMode rate_mode_from_string(const std::string& name);

/// Per-row positive-prediction value under `options` (0/1 in hard mode).
VecXd positive_values(const VecXd& scores, const RateOptions& options);

/// Confusion statistics over a subgroup. Counts are fractional in expected
/// mode. Undefined rates are flagged and left at 0; callers must check.
struct SubgroupFrame {
  Mask mask;
  Eigen::Index n = 0;
  double tp = 0, fp = 0, tn = 0, fn = 0;
  double ppr = 0, tpr = 0, fpr = 0;
  bool empty = true;
  bool tpr_defined = false;
  bool fpr_defined = false;
};

SubgroupFrame stats(const Table& t, const VecXd& scores, const Predicate& pred, const RateOptions& options = {});
SubgroupFrame stats(const Table& t, const VecXd& scores, const Mask& rows, const RateOptions& options = {});

/// Throws AlignmentError when `scores` does not line up with `t`, Error when a
/// score falls outside [0, 1].
void check_predictions(const Table& t, const VecXd& scores);

/// One-column CSV of scores in row order; a non-numeric first line is taken
/// as a header.
VecXd load_predictions(const std::filesystem::path& path);
void save_predictions(const std::filesystem::path& path, const VecXd& scores, const std::string& header = "score");

}  // namespace fairsep
