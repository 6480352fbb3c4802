#pragma once

#include "fairsep/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fairsep {

enum class ColumnKind { Protected, Categorical, Ordinal, Numerical, Target };

std::string to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& name);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Numerical;
  bool effort = false;     // tag, Numerical or Ordinal only
  bool privilege = false;  // tag, Numerical or Ordinal only
  // Target only: raw strings mapped to 1. Empty means the raw values must
  // already be 0/1, or have at most two distinct values.
  std::vector<std::string> positive_labels;
  // Ordinal only: optional explicit level order (rank = index). When empty
  // the raw values are parsed as numbers.
  std::vector<std::string> levels;

  bool is_categorical() const {
    return kind == ColumnKind::Protected || kind == ColumnKind::Categorical || kind == ColumnKind::Target;
  }
};

struct Schema {
  std::vector<ColumnSpec> columns;
  std::string missing_marker = "?";
  char delimiter = ',';
  bool trim = true;

  static Schema from_json(const nlohmann::json& doc);
  static Schema load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Throws SchemaError on structural problems (no target, bad tags, ...).
  void validate() const;

  const ColumnSpec* find(const std::string& name) const;
  const ColumnSpec& target() const;
  const ColumnSpec* protected_column() const;
  const ColumnSpec* privilege_column() const;
  const ColumnSpec* effort_column() const;
};

struct Column {
  ColumnSpec spec;
  /// Numeric value per row. Categorical columns hold their level code, the
  /// target holds the binarized label.
  VecXd values;
  /// Categorical and target columns: raw level per code, sorted. Ordinal
  /// columns with an explicit order: level per rank.
  std::vector<std::string> levels;
  /// Level code per row (categorical and target columns only).
  std::vector<int> codes;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  /// Textual cell value as it would appear in a CSV.
  std::string cell(std::size_t row) const;
  /// Code of `level`, or -1 when the column does not contain it.
  int code_of(const std::string& level) const;
};

/// Immutable columnar table. All columns have the same length; the target is
/// binary; rows with missing markers were dropped at load time.
class Table {
 public:
  Table() = default;
  Table(Schema schema, std::vector<Column> columns, std::size_t dropped = 0);

  std::size_t rows() const { return rows_; }
  std::size_t dropped() const { return dropped_; }
  const Schema& schema() const { return schema_; }
  const std::vector<Column>& columns() const { return columns_; }

  bool has(const std::string& name) const;
  const Column& column(const std::string& name) const;
  const Column& target() const;
  const Column& protected_column() const;
  const Column& privilege_column() const;
  const Column& effort_column() const;

  const VecXd& labels() const { return target().values; }

  /// New table holding `rows` (in the given order); levels are preserved.
  Table subset(const std::vector<Eigen::Index>& rows) const;
  Table subset(const Mask& mask) const;

 private:
  Schema schema_;
  std::vector<Column> columns_;
  std::map<std::string, std::size_t> index_;
  std::size_t rows_ = 0;
  std::size_t dropped_ = 0;
};

Table load_csv(const std::filesystem::path& path, const Schema& schema);
Table read_csv(std::istream& in, const Schema& schema);

/// Writes the schema columns with a header; `read_csv` on the output with the
/// same schema reproduces every value.
void write_csv(std::ostream& out, const Table& table);
void save_csv(const std::filesystem::path& path, const Table& table);

// Thresholds ---------------------------------------------------------------

struct PrivilegeThreshold {
  std::string column;
  double p = 5.0;  // percent
  double tau = 0.0;
  double realized_fraction = 0.0;
};

/// Smallest observed value v with fraction(x >= v) <= p/100.
PrivilegeThreshold privilege_threshold(const Table& t, double p);
PrivilegeThreshold privilege_threshold(const Table& t, const std::string& column, double p);

enum class EffortScope { Global, PerGroup, PerCategoryGroup };

std::string to_string(EffortScope scope);
EffortScope effort_scope_from_string(const std::string& name);

struct EffortThresholds {
  std::string column;
  EffortScope scope = EffortScope::Global;
  std::string group_column;     // PerGroup, PerCategoryGroup
  std::string category_column;  // PerCategoryGroup
  double global = 0.0;
  std::map<std::string, double> per_group;
  std::map<std::pair<std::string, std::string>, double> per_cell;  // (category, group)
  /// Cells that inherited the parent mean because they had fewer than 2 rows.
  std::vector<std::string> fallbacks;

  /// Threshold that applies to `row` of `t`. Unknown cells use the parent.
  double lookup(const Table& t, std::size_t row) const;
  VecXd per_row(const Table& t) const;
};

/// Arithmetic mean of the effort column per scope cell. Empty column names
/// default to the schema's effort-tagged and protected columns.
EffortThresholds effort_threshold(const Table& t, EffortScope scope, const std::string& category_column = {},
                                  const std::string& effort_column = {}, const std::string& group_column = {});

// Feature encoding -------------------------------------------------------------

struct EncoderOptions {
  bool include_protected = false;
};

struct FeatureBlock {
  std::string source;
  Eigen::Index start = 0;
  Eigen::Index width = 0;
  std::vector<std::string> levels;  // one-hot levels; empty for numeric blocks
  double mean = 0.0;                // numeric blocks
  double scale = 1.0;
};

/// One-hot for categoricals, z-scores for numerical/ordinal columns. Fit on
/// a training table, then applied to any table with the same schema.
class Encoder {
 public:
  static Encoder fit(const Table& train, EncoderOptions options = {});

  MatXd transform(const Table& t) const;
  Eigen::Index width() const { return width_; }
  const std::vector<FeatureBlock>& blocks() const { return blocks_; }
  const FeatureBlock* block(const std::string& source) const;
  const std::vector<std::string>& warnings() const { return warnings_; }
  const EncoderOptions& options() const { return options_; }

  nlohmann::json to_json() const;
  static Encoder from_json(const nlohmann::json& doc);

 private:
  EncoderOptions options_;
  std::vector<FeatureBlock> blocks_;
  std::vector<std::string> warnings_;
  Eigen::Index width_ = 0;
};

}  // namespace fairsep
