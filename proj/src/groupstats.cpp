#include "fairsep/groupstats.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>

namespace fairsep {

namespace {

const Column& require(const Table& t, const std::string& name) {
  if (!t.has(name)) throw PredicateError("predicate refers to unknown column '" + name + "'");
  return t.column(name);
}

const Column& require_numeric(const Table& t, const std::string& name) {
  const auto& col = require(t, name);
  if (col.spec.is_categorical()) throw PredicateError("threshold clause on categorical column '" + name + "'");
  return col;
}

}  // namespace

Mask mask(const Table& t, const Predicate& pred) {
  const auto n = static_cast<Eigen::Index>(t.rows());
  Mask m = all_rows(n);
  for (const auto& clause : pred.clauses) {
    std::visit(
        [&](const auto& c) {
          using C = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<C, EqualsClause>) {
            const auto& col = require(t, c.column);
            if (!col.spec.is_categorical())
              throw PredicateError("equality clause on non-categorical column '" + c.column + "'");
            const int code = col.code_of(c.level);
            if (code < 0) throw PredicateError("column '" + c.column + "' has no value '" + c.level + "'");
            for (Eigen::Index i = 0; i < n; ++i) m[i] = m[i] && col.codes[static_cast<std::size_t>(i)] == code;
          } else if constexpr (std::is_same_v<C, LabelClause>) {
            if (c.y != 0 && c.y != 1) throw PredicateError("label clause needs y in {0,1}");
            m = m && (t.labels().array() == static_cast<double>(c.y));
          } else if constexpr (std::is_same_v<C, ThresholdClause>) {
            const auto& x = require_numeric(t, c.column).values.array();
            const Mask hit = c.cmp == Cmp::Ge ? Mask(x >= c.value) : Mask(x < c.value);
            m = m && hit;
          } else {
            const auto& x = require_numeric(t, c.column).values.array();
            if (c.per_row.size() != n) throw AlignmentError("row-wise threshold length mismatch for " + c.column);
            const Mask hit = c.cmp == Cmp::Ge ? Mask(x >= c.per_row.array()) : Mask(x < c.per_row.array());
            m = m && hit;
          }
        },
        clause);
  }
  return m;
}

std::string to_string(RateMode mode) { return mode == RateMode::Hard ? "hard" : "expected"; }

RateMode rate_mode_from_string(const std::string& name) {
  if (name == "hard") return RateMode::Hard;
  if (name == "expected") return RateMode::Expected;
  throw ConfigError("unknown rate mode '" + name + "'");
}

VecXd positive_values(const VecXd& scores, const RateOptions& options) {
  if (options.mode == RateMode::Expected) return scores;
  if (!(options.cutoff > 0.0 && options.cutoff < 1.0)) throw ConfigError("decision cutoff must lie in (0, 1)");
  return (scores.array() >= options.cutoff).cast<double>().matrix();
}

void check_predictions(const Table& t, const VecXd& scores) {
  if (static_cast<std::size_t>(scores.size()) != t.rows())
    throw AlignmentError(fmt::format("{} predictions for {} rows", scores.size(), t.rows()));
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) throw Error(fmt::format("prediction {} outside [0,1]", i));
}

SubgroupFrame stats(const Table& t, const VecXd& scores, const Predicate& pred, const RateOptions& options) {
  check_predictions(t, scores);
  return stats(t, scores, mask(t, pred), options);
}

SubgroupFrame stats(const Table& t, const VecXd& scores, const Mask& rows, const RateOptions& options) {
  check_predictions(t, scores);
  if (rows.size() != scores.size()) throw AlignmentError("mask length does not match predictions");
  const VecXd pos = positive_values(scores, options);
  const VecXd& y = t.labels();
  SubgroupFrame f;
  f.mask = rows;
  for (Eigen::Index i = 0; i < rows.size(); ++i) {
    if (!rows[i]) continue;
    ++f.n;
    const double h = pos[i];
    if (y[i] > 0.5) {
      f.tp += h;
      f.fn += 1.0 - h;
    } else {
      f.fp += h;
      f.tn += 1.0 - h;
    }
  }
  f.empty = f.n == 0;
  if (!f.empty) f.ppr = (f.tp + f.fp) / static_cast<double>(f.n);
  const double positives = f.tp + f.fn;
  const double negatives = f.fp + f.tn;
  f.tpr_defined = positives > 0.0;
  f.fpr_defined = negatives > 0.0;
  if (f.tpr_defined) f.tpr = f.tp / positives;
  if (f.fpr_defined) f.fpr = f.fp / negatives;
  return f;
}

VecXd load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open predictions " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      if (lineno == 1) continue;  // header
      throw ParseError("non-numeric prediction '" + line + "'", lineno);
    }
    values.push_back(v);
  }
  return Eigen::Map<VecXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void save_predictions(const std::filesystem::path& path, const VecXd& scores, const std::string& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << header << '\n';
  for (Eigen::Index i = 0; i < scores.size(); ++i) out << fmt::format("{}", scores[i]) << '\n';
}

}  // namespace fairsep
