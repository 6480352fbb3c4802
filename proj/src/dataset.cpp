#include "fairsep/dataset.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace fairsep {

namespace {

std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

// One RFC-4180 record; quoted fields may span lines. Returns false at EOF.
bool next_record(std::istream& in, char delim, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  std::string raw;
  if (!std::getline(in, raw)) return false;
  ++line;
  const std::size_t start_line = line;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  std::size_t i = 0;
  while (true) {
    if (i == raw.size()) {
      if (quoted) {
        std::string more;
        if (!std::getline(in, more)) throw ParseError("unterminated quoted field", start_line);
        ++line;
        field.push_back('\n');
        raw = std::move(more);
        i = 0;
        continue;
      }
      break;
    }
    char c = raw[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < raw.size() && raw[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      if (!trim(field).empty()) throw ParseError("quote inside unquoted field", line);
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == delim) {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c == '\r' && i + 1 == raw.size()) {
      // CRLF line ending
    } else {
      if (was_quoted && c != ' ' && c != '\t') throw ParseError("text after closing quote", line);
      field.push_back(c);
    }
    ++i;
  }
  fields.push_back(std::move(field));
  return true;
}

std::string quote_if_needed(const std::string& s, char delim) {
  if (s.find_first_of(std::string{delim, '"', '\n', '\r'}) == std::string::npos && trim(s) == s) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_number(double v) { return fmt::format("{}", v); }

}  // namespace

std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Protected: return "protected";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Ordinal: return "ordinal";
    case ColumnKind::Numerical: return "numerical";
    case ColumnKind::Target: return "target";
  }
  return "?";
}

ColumnKind column_kind_from_string(const std::string& name) {
  std::string n;
  std::transform(name.begin(), name.end(), std::back_inserter(n), [](unsigned char c) { return std::tolower(c); });
  if (n == "protected") return ColumnKind::Protected;
  if (n == "categorical") return ColumnKind::Categorical;
  if (n == "ordinal") return ColumnKind::Ordinal;
  if (n == "numerical" || n == "numeric") return ColumnKind::Numerical;
  if (n == "target") return ColumnKind::Target;
  throw SchemaError("unknown column kind '" + name + "'");
}

// Schema ----------------------------------------------------------------------

Schema Schema::from_json(const nlohmann::json& doc) {
  Schema s;
  if (!doc.contains("columns") || !doc["columns"].is_array()) throw SchemaError("schema needs a 'columns' array");
  for (const auto& c : doc["columns"]) {
    ColumnSpec spec;
    spec.name = c.at("name").get<std::string>();
    spec.kind = column_kind_from_string(c.at("kind").get<std::string>());
    if (c.contains("tags")) {
      for (const auto& tag : c["tags"]) {
        auto t = tag.get<std::string>();
        std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (t == "effort") spec.effort = true;
        else if (t == "privilege") spec.privilege = true;
        else throw SchemaError("unknown tag '" + t + "' on column " + spec.name);
      }
    }
    if (c.contains("positive_label")) {
      const auto& pl = c["positive_label"];
      if (pl.is_array()) spec.positive_labels = pl.get<std::vector<std::string>>();
      else spec.positive_labels.push_back(pl.get<std::string>());
    }
    if (c.contains("levels")) spec.levels = c["levels"].get<std::vector<std::string>>();
    s.columns.push_back(std::move(spec));
  }
  if (doc.contains("missing_marker")) s.missing_marker = doc["missing_marker"].get<std::string>();
  if (doc.contains("delimiter")) {
    auto d = doc["delimiter"].get<std::string>();
    if (d.size() != 1) throw SchemaError("delimiter must be a single character");
    s.delimiter = d[0];
  }
  if (doc.contains("trim")) s.trim = doc["trim"].get<bool>();
  s.validate();
  return s;
}

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("invalid schema JSON " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json Schema::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns) {
    nlohmann::json j{{"name", c.name}, {"kind", to_string(c.kind)}};
    nlohmann::json tags = nlohmann::json::array();
    if (c.effort) tags.push_back("effort");
    if (c.privilege) tags.push_back("privilege");
    j["tags"] = tags;
    if (!c.positive_labels.empty()) j["positive_label"] = c.positive_labels;
    if (!c.levels.empty()) j["levels"] = c.levels;
    cols.push_back(std::move(j));
  }
  return {{"columns", cols},
          {"missing_marker", missing_marker},
          {"delimiter", std::string(1, delimiter)},
          {"trim", trim}};
}

void Schema::validate() const {
  int targets = 0;
  std::set<std::string> names;
  for (const auto& c : columns) {
    if (!names.insert(c.name).second) throw SchemaError("duplicate column " + c.name);
    if (c.kind == ColumnKind::Target) ++targets;
    if ((c.effort || c.privilege) && c.kind != ColumnKind::Numerical && c.kind != ColumnKind::Ordinal)
      throw SchemaError("effort/privilege tags require a numerical or ordinal column: " + c.name);
    if (!c.positive_labels.empty() && c.kind != ColumnKind::Target)
      throw SchemaError("positive_label only applies to the target: " + c.name);
  }
  if (targets != 1) throw SchemaError("schema must have exactly one target column");
  auto count_if = [&](auto pred) { return std::count_if(columns.begin(), columns.end(), pred); };
  if (count_if([](const ColumnSpec& c) { return c.privilege; }) > 1) throw SchemaError("more than one privilege column");
  if (count_if([](const ColumnSpec& c) { return c.effort; }) > 1) throw SchemaError("more than one effort column");
  if (count_if([](const ColumnSpec& c) { return c.kind == ColumnKind::Protected; }) > 1)
    throw SchemaError("more than one protected column");
}

const ColumnSpec* Schema::find(const std::string& name) const {
  for (const auto& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

const ColumnSpec& Schema::target() const {
  for (const auto& c : columns)
    if (c.kind == ColumnKind::Target) return c;
  throw SchemaError("schema has no target column");
}

const ColumnSpec* Schema::protected_column() const {
  for (const auto& c : columns)
    if (c.kind == ColumnKind::Protected) return &c;
  return nullptr;
}

const ColumnSpec* Schema::privilege_column() const {
  for (const auto& c : columns)
    if (c.privilege) return &c;
  return nullptr;
}

const ColumnSpec* Schema::effort_column() const {
  for (const auto& c : columns)
    if (c.effort) return &c;
  return nullptr;
}

// Column / Table -----------------------------------------------------------------

std::string Column::cell(std::size_t row) const {
  if (spec.is_categorical()) return levels[static_cast<std::size_t>(codes[row])];
  if (spec.kind == ColumnKind::Ordinal && !levels.empty())
    return levels[static_cast<std::size_t>(values[static_cast<Eigen::Index>(row)])];
  return format_number(values[static_cast<Eigen::Index>(row)]);
}

int Column::code_of(const std::string& level) const {
  auto it = std::lower_bound(levels.begin(), levels.end(), level);
  if (spec.is_categorical()) {
    if (it != levels.end() && *it == level) return static_cast<int>(it - levels.begin());
    return -1;
  }
  auto found = std::find(levels.begin(), levels.end(), level);
  return found == levels.end() ? -1 : static_cast<int>(found - levels.begin());
}

Table::Table(Schema schema, std::vector<Column> columns, std::size_t dropped)
    : schema_(std::move(schema)), columns_(std::move(columns)), dropped_(dropped) {
  rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].size() != rows_) throw SchemaError("column length mismatch: " + columns_[i].spec.name);
    index_[columns_[i].spec.name] = i;
  }
}

bool Table::has(const std::string& name) const { return index_.count(name) > 0; }

const Column& Table::column(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw SchemaError("no column '" + name + "'");
  return columns_[it->second];
}

const Column& Table::target() const { return column(schema_.target().name); }

const Column& Table::protected_column() const {
  const auto* spec = schema_.protected_column();
  if (!spec) throw SchemaError("schema has no protected column");
  return column(spec->name);
}

const Column& Table::privilege_column() const {
  const auto* spec = schema_.privilege_column();
  if (!spec) throw SchemaError("schema has no privilege-tagged column");
  return column(spec->name);
}

const Column& Table::effort_column() const {
  const auto* spec = schema_.effort_column();
  if (!spec) throw SchemaError("schema has no effort-tagged column");
  return column(spec->name);
}

Table Table::subset(const std::vector<Eigen::Index>& rows) const {
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) {
    Column s;
    s.spec = c.spec;
    s.levels = c.levels;
    s.values.resize(static_cast<Eigen::Index>(rows.size()));
    if (!c.codes.empty() || c.spec.is_categorical()) s.codes.resize(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      s.values[static_cast<Eigen::Index>(k)] = c.values[rows[k]];
      if (!s.codes.empty()) s.codes[k] = c.codes[static_cast<std::size_t>(rows[k])];
    }
    cols.push_back(std::move(s));
  }
  return Table(schema_, std::move(cols), 0);
}

Table Table::subset(const Mask& mask) const {
  if (static_cast<std::size_t>(mask.size()) != rows_) throw AlignmentError("mask length does not match table");
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    if (mask[i]) rows.push_back(i);
  return subset(rows);
}

// CSV -----------------------------------------------------------------------------

Table read_csv(std::istream& in, const Schema& schema) {
  schema.validate();
  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!next_record(in, schema.delimiter, fields, line)) throw ParseError("missing header", 1);
  std::vector<std::string> header;
  for (auto& f : fields) header.push_back(trim(f));

  std::vector<std::size_t> source;  // schema column -> header index
  for (const auto& spec : schema.columns) {
    auto it = std::find(header.begin(), header.end(), spec.name);
    if (it == header.end()) throw SchemaError("schema column '" + spec.name + "' absent from CSV header");
    source.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  const std::size_t ncols = schema.columns.size();
  std::vector<std::vector<std::string>> raw(ncols);
  std::vector<std::size_t> lines;
  std::size_t dropped = 0;
  while (true) {
    std::size_t record_line = line + 1;
    if (!next_record(in, schema.delimiter, fields, line)) break;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
    if (fields.size() != header.size())
      throw ParseError(fmt::format("expected {} fields, found {}", header.size(), fields.size()), record_line);
    bool missing = false;
    for (std::size_t c = 0; c < ncols; ++c) {
      auto& f = fields[source[c]];
      if (schema.trim) f = trim(f);
      if (f == schema.missing_marker) missing = true;
    }
    if (missing) {
      ++dropped;
      continue;
    }
    for (std::size_t c = 0; c < ncols; ++c) raw[c].push_back(fields[source[c]]);
    lines.push_back(record_line);
  }

  const std::size_t n = lines.size();
  std::vector<Column> columns;
  for (std::size_t c = 0; c < ncols; ++c) {
    Column col;
    col.spec = schema.columns[c];
    col.values.resize(static_cast<Eigen::Index>(n));
    const auto& vals = raw[c];
    if (col.spec.is_categorical()) {
      std::set<std::string> distinct(vals.begin(), vals.end());
      col.levels.assign(distinct.begin(), distinct.end());
      col.codes.resize(n);
      for (std::size_t r = 0; r < n; ++r) col.codes[r] = col.code_of(vals[r]);
      if (col.spec.kind == ColumnKind::Protected && n > 0 && col.levels.size() < 2)
        throw SchemaError("protected column '" + col.spec.name + "' needs at least two distinct values");
      if (col.spec.kind == ColumnKind::Target) {
        std::vector<double> level_value(col.levels.size());
        if (!col.spec.positive_labels.empty()) {
          for (std::size_t l = 0; l < col.levels.size(); ++l)
            level_value[l] = std::find(col.spec.positive_labels.begin(), col.spec.positive_labels.end(),
                                       col.levels[l]) != col.spec.positive_labels.end()
                                 ? 1.0
                                 : 0.0;
        } else {
          bool binary = std::all_of(col.levels.begin(), col.levels.end(),
                                    [](const std::string& s) { return s == "0" || s == "1"; });
          if (!binary && col.levels.size() > 2)
            throw SchemaError("target '" + col.spec.name + "' has " + std::to_string(col.levels.size()) +
                              " distinct values and no positive_label rule");
          for (std::size_t l = 0; l < col.levels.size(); ++l)
            level_value[l] = binary ? (col.levels[l] == "1" ? 1.0 : 0.0) : static_cast<double>(l);
        }
        for (std::size_t r = 0; r < n; ++r)
          col.values[static_cast<Eigen::Index>(r)] = level_value[static_cast<std::size_t>(col.codes[r])];
      } else {
        for (std::size_t r = 0; r < n; ++r) col.values[static_cast<Eigen::Index>(r)] = col.codes[r];
      }
    } else if (col.spec.kind == ColumnKind::Ordinal && !col.spec.levels.empty()) {
      col.levels = col.spec.levels;
      for (std::size_t r = 0; r < n; ++r) {
        auto it = std::find(col.levels.begin(), col.levels.end(), vals[r]);
        if (it == col.levels.end())
          throw ParseError("unknown ordinal level '" + vals[r] + "' in column " + col.spec.name, lines[r]);
        col.values[static_cast<Eigen::Index>(r)] = static_cast<double>(it - col.levels.begin());
      }
    } else {
      for (std::size_t r = 0; r < n; ++r) {
        auto v = parse_double(vals[r]);
        if (!v) throw ParseError("non-numeric value '" + vals[r] + "' in column " + col.spec.name, lines[r]);
        col.values[static_cast<Eigen::Index>(r)] = *v;
      }
    }
    columns.push_back(std::move(col));
  }
  return Table(schema, std::move(columns), dropped);
}

Table load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Table& table) {
  const char d = table.schema().delimiter;
  const auto& cols = table.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out << d;
    out << quote_if_needed(cols[c].spec.name, d);
  }
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out << d;
      out << quote_if_needed(cols[c].cell(r), d);
    }
    out << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_csv(out, table);
}

// Thresholds -------------------------------------------------------------------------

PrivilegeThreshold privilege_threshold(const Table& t, double p) {
  return privilege_threshold(t, t.privilege_column().spec.name, p);
}

PrivilegeThreshold privilege_threshold(const Table& t, const std::string& column, double p) {
  if (!(p > 0.0 && p < 100.0)) throw ConfigError(fmt::format("p must lie in (0, 100), got {}", p));
  const auto& col = t.column(column);
  if (col.spec.kind != ColumnKind::Numerical && col.spec.kind != ColumnKind::Ordinal)
    throw SchemaError("privilege column must be numerical or ordinal: " + column);
  const std::size_t n = t.rows();
  if (n == 0) throw DegenerateError("privilege threshold on an empty table");
  std::vector<double> sorted(col.values.data(), col.values.data() + n);
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back())
    throw DegenerateError("privilege column '" + column + "' is constant; no top-p% split exists");
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && sorted[i] == sorted[i - 1]) continue;
    const double tail = static_cast<double>(n - i);
    if (100.0 * tail <= p * nd)
      return PrivilegeThreshold{column, p, sorted[i], tail / nd};
  }
  throw DegenerateError(fmt::format("no value of '{}' leaves at most {}% of rows at or above it", column, p));
}

std::string to_string(EffortScope scope) {
  switch (scope) {
    case EffortScope::Global: return "global";
    case EffortScope::PerGroup: return "per_group";
    case EffortScope::PerCategoryGroup: return "per_category_group";
  }
  return "?";
}

EffortScope effort_scope_from_string(const std::string& name) {
  if (name == "global") return EffortScope::Global;
  if (name == "per_group") return EffortScope::PerGroup;
  if (name == "per_category_group") return EffortScope::PerCategoryGroup;
  throw ConfigError("unknown effort scope '" + name + "'");
}

EffortThresholds effort_threshold(const Table& t, EffortScope scope, const std::string& category_column,
                                  const std::string& effort_column, const std::string& group_column) {
  const auto& effort = effort_column.empty() ? t.effort_column() : t.column(effort_column);
  if (effort.spec.is_categorical()) throw SchemaError("effort column must be numerical or ordinal: " + effort.spec.name);
  if (t.rows() == 0) throw DegenerateError("effort threshold on an empty table");
  EffortThresholds th;
  th.column = effort.spec.name;
  th.scope = scope;
  const auto& x = effort.values;
  th.global = x.sum() / static_cast<double>(x.size());
  if (scope == EffortScope::Global) return th;

  const auto& group = group_column.empty() ? t.protected_column() : t.column(group_column);
  if (!group.spec.is_categorical()) throw SchemaError("effort group column must be categorical: " + group.spec.name);
  th.group_column = group.spec.name;
  {
    std::vector<double> sum(group.levels.size(), 0.0);
    std::vector<std::size_t> n(group.levels.size(), 0);
    for (std::size_t r = 0; r < t.rows(); ++r) {
      auto g = static_cast<std::size_t>(group.codes[r]);
      sum[g] += x[static_cast<Eigen::Index>(r)];
      ++n[g];
    }
    for (std::size_t g = 0; g < n.size(); ++g) {
      if (n[g] == 0) continue;
      if (n[g] < 2) {
        th.per_group[group.levels[g]] = th.global;
        th.fallbacks.push_back(group.levels[g]);
      } else {
        th.per_group[group.levels[g]] = sum[g] / static_cast<double>(n[g]);
      }
    }
  }
  if (scope == EffortScope::PerGroup) return th;

  if (category_column.empty()) throw ConfigError("per_category_group effort scope needs a category column");
  const auto& cat = t.column(category_column);
  if (!cat.spec.is_categorical() || cat.spec.kind == ColumnKind::Target)
    throw ConfigError("effort category column must be categorical: " + category_column);
  th.category_column = category_column;
  const std::size_t G = group.levels.size();
  std::vector<double> sum(cat.levels.size() * G, 0.0);
  std::vector<std::size_t> n(cat.levels.size() * G, 0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto k = static_cast<std::size_t>(cat.codes[r]) * G + static_cast<std::size_t>(group.codes[r]);
    sum[k] += x[static_cast<Eigen::Index>(r)];
    ++n[k];
  }
  for (std::size_t a = 0; a < cat.levels.size(); ++a) {
    for (std::size_t g = 0; g < G; ++g) {
      const auto k = a * G + g;
      if (n[k] == 0) continue;
      auto key = std::make_pair(cat.levels[a], group.levels[g]);
      if (n[k] < 2) {
        th.per_cell[key] = th.per_group.at(group.levels[g]);
        th.fallbacks.push_back(cat.levels[a] + "|" + group.levels[g]);
      } else {
        th.per_cell[key] = sum[k] / static_cast<double>(n[k]);
      }
    }
  }
  return th;
}

double EffortThresholds::lookup(const Table& t, std::size_t row) const {
  if (scope == EffortScope::Global) return global;
  const auto& g = t.column(group_column);
  const auto& glevel = g.levels[static_cast<std::size_t>(g.codes[row])];
  auto git = per_group.find(glevel);
  const double group_value = git == per_group.end() ? global : git->second;
  if (scope == EffortScope::PerGroup) return group_value;
  const auto& c = t.column(category_column);
  auto cit = per_cell.find({c.levels[static_cast<std::size_t>(c.codes[row])], glevel});
  return cit == per_cell.end() ? group_value : cit->second;
}

VecXd EffortThresholds::per_row(const Table& t) const {
  VecXd e(static_cast<Eigen::Index>(t.rows()));
  for (std::size_t r = 0; r < t.rows(); ++r) e[static_cast<Eigen::Index>(r)] = lookup(t, r);
  return e;
}

// Encoder -------------------------------------------------------------------------------

Encoder Encoder::fit(const Table& train, EncoderOptions options) {
  Encoder enc;
  enc.options_ = options;
  const auto n = static_cast<Eigen::Index>(train.rows());
  Eigen::Index offset = 0;
  for (const auto& col : train.columns()) {
    const auto kind = col.spec.kind;
    if (kind == ColumnKind::Target) continue;
    if (kind == ColumnKind::Protected && !options.include_protected) continue;
    FeatureBlock block;
    block.source = col.spec.name;
    block.start = offset;
    if (col.spec.is_categorical()) {
      std::vector<bool> seen(col.levels.size(), false);
      for (int code : col.codes) seen[static_cast<std::size_t>(code)] = true;
      for (std::size_t l = 0; l < col.levels.size(); ++l)
        if (seen[l]) block.levels.push_back(col.levels[l]);
      if (block.levels.size() < 2) {
        enc.warnings_.push_back("categorical column '" + col.spec.name + "' has fewer than 2 levels; dropped");
        continue;
      }
      block.width = static_cast<Eigen::Index>(block.levels.size());
    } else {
      if (n == 0) {
        enc.warnings_.push_back("numeric column '" + col.spec.name + "' has no rows; dropped");
        continue;
      }
      const double mean = col.values.sum() / static_cast<double>(n);
      const double var = (col.values.array() - mean).square().sum() / static_cast<double>(n);
      if (!(var > 0.0)) {
        enc.warnings_.push_back("numeric column '" + col.spec.name + "' is constant; dropped");
        continue;
      }
      block.mean = mean;
      block.scale = std::sqrt(var);
      block.width = 1;
    }
    offset += block.width;
    enc.blocks_.push_back(std::move(block));
  }
  enc.width_ = offset;
  return enc;
}

MatXd Encoder::transform(const Table& t) const {
  const auto n = static_cast<Eigen::Index>(t.rows());
  MatXd X = MatXd::Zero(n, width_);
  for (const auto& block : blocks_) {
    if (!t.has(block.source)) throw EncodingError("table lacks encoded column '" + block.source + "'");
    const auto& col = t.column(block.source);
    if (block.levels.empty()) {
      if (col.spec.is_categorical()) throw EncodingError("column '" + block.source + "' changed kind");
      X.col(block.start) = (col.values.array() - block.mean) / block.scale;
    } else {
      if (!col.spec.is_categorical()) throw EncodingError("column '" + block.source + "' changed kind");
      std::vector<Eigen::Index> position(col.levels.size(), -1);
      for (std::size_t l = 0; l < col.levels.size(); ++l) {
        auto it = std::lower_bound(block.levels.begin(), block.levels.end(), col.levels[l]);
        if (it != block.levels.end() && *it == col.levels[l]) position[l] = it - block.levels.begin();
      }
      for (Eigen::Index r = 0; r < n; ++r) {
        auto pos = position[static_cast<std::size_t>(col.codes[static_cast<std::size_t>(r)])];
        if (pos >= 0) X(r, block.start + pos) = 1.0;
      }
    }
  }
  return X;
}

const FeatureBlock* Encoder::block(const std::string& source) const {
  for (const auto& b : blocks_)
    if (b.source == source) return &b;
  return nullptr;
}

nlohmann::json Encoder::to_json() const {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : blocks_) {
    nlohmann::json j{{"source", b.source}, {"start", b.start}, {"width", b.width}};
    if (b.levels.empty()) {
      j["mean"] = b.mean;
      j["scale"] = b.scale;
    } else {
      j["levels"] = b.levels;
    }
    blocks.push_back(std::move(j));
  }
  return {{"include_protected", options_.include_protected}, {"width", width_}, {"blocks", blocks}};
}

Encoder Encoder::from_json(const nlohmann::json& doc) {
  Encoder enc;
  enc.options_.include_protected = doc.at("include_protected").get<bool>();
  enc.width_ = doc.at("width").get<Eigen::Index>();
  for (const auto& j : doc.at("blocks")) {
    FeatureBlock b;
    b.source = j.at("source").get<std::string>();
    b.start = j.at("start").get<Eigen::Index>();
    b.width = j.at("width").get<Eigen::Index>();
    if (j.contains("levels")) {
      b.levels = j["levels"].get<std::vector<std::string>>();
    } else {
      b.mean = j.at("mean").get<double>();
      b.scale = j.at("scale").get<double>();
    }
    enc.blocks_.push_back(std::move(b));
  }
  return enc;
}

}  // namespace fairsep
