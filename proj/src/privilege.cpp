#include "fairsep/privilege.hpp"

#include "fairsep/groupstats.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace fairsep {

namespace {

constexpr double kTie = 1e-12;

double accuracy(const VecXd& predicted, const VecXd& labels) {
  return 1.0 - (predicted - labels).cwiseAbs().mean();
}

Table with_permuted(const Table& t, const std::string& name, const std::vector<std::size_t>& perm) {
  std::vector<Column> columns = t.columns();
  for (auto& col : columns) {
    if (col.spec.name != name) continue;
    const Column original = col;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      col.values[static_cast<Eigen::Index>(i)] = original.values[static_cast<Eigen::Index>(perm[i])];
      if (!col.codes.empty()) col.codes[i] = original.codes[perm[i]];
    }
  }
  return Table(t.schema(), std::move(columns), t.dropped());
}

std::string format_number(double v) { return fmt::format("{}", v); }

}  // namespace

// Importance -----------------------------------------------------------------------

const Importance* ImportanceTable::find(const std::string& column) const {
  for (const auto& r : rows)
    if (r.column == column) return &r;
  return nullptr;
}

nlohmann::json ImportanceTable::to_json() const {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& r : rows)
    items.push_back({{"rank", r.rank}, {"column", r.column}, {"mean", r.mean}, {"sd", r.sd}, {"drops", r.drops}});
  return {{"protected", protected_column},
          {"group", group},
          {"baseline_accuracy", baseline_accuracy},
          {"fit_rows", fit_rows},
          {"holdout_rows", holdout_rows},
          {"repeats", repeats},
          {"seed", seed},
          {"importances", items},
          {"chosen", chosen},
          {"tie", tie},
          {"warnings", warnings}};
}

void ImportanceTable::write_csv(std::ostream& out) const {
  out << "rank,column,mean_drop,sd\n";
  for (const auto& r : rows) out << r.rank << ',' << r.column << ',' << format_number(r.mean) << ',' << format_number(r.sd) << '\n';
}

nlohmann::json ExtractionOptions::to_json() const {
  return {{"group", group},
          {"repeats", repeats},
          {"holdout", holdout},
          {"seed", seed},
          {"exclude_effort", exclude_effort},
          {"base", base.to_json()}};
}

ExtractionOptions ExtractionOptions::from_json(const nlohmann::json& j) {
  ExtractionOptions o;
  o.group = j.value("group", o.group);
  o.repeats = j.value("repeats", o.repeats);
  o.holdout = j.value("holdout", o.holdout);
  o.seed = j.value("seed", o.seed);
  o.exclude_effort = j.value("exclude_effort", o.exclude_effort);
  if (j.contains("base")) o.base = BaseParams::from_json(j["base"]);
  return o;
}

std::vector<std::string> privilege_candidates(const Table& t, bool exclude_effort) {
  std::vector<std::string> out;
  for (const auto& c : t.schema().columns) {
    if (c.kind != ColumnKind::Numerical && c.kind != ColumnKind::Ordinal) continue;
    if (exclude_effort && c.effort) continue;
    out.push_back(c.name);
  }
  return out;
}

ImportanceTable permutation_importance(const Table& holdout, const std::vector<std::string>& candidates,
                                       const Predictor& predict, int repeats, std::uint64_t seed) {
  if (repeats < 1) throw ConfigError("permutation importance needs at least one repeat");
  if (holdout.rows() < 2) throw DegenerateError("holdout slice has fewer than two rows");
  for (const auto& c : candidates)
    if (!holdout.has(c)) throw SchemaError("unknown candidate column '" + c + "'");

  const VecXd& y = holdout.labels();
  const VecXd base = predict(holdout);
  if (base.size() != y.size()) throw AlignmentError("predictor returned the wrong number of rows");
  if (base.minCoeff() == base.maxCoeff())
    throw DegenerateError("predictor is constant on the holdout slice; importances would all be zero");

  ImportanceTable table;
  table.baseline_accuracy = accuracy(base, y);
  table.holdout_rows = holdout.rows();
  table.repeats = repeats;
  table.seed = seed;

  std::map<std::string, std::vector<double>> drops;
  std::vector<std::size_t> perm(holdout.rows());
  for (int r = 0; r < repeats; ++r) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(r));
    std::shuffle(perm.begin(), perm.end(), rng);
    for (const auto& c : candidates)
      drops[c].push_back(table.baseline_accuracy - accuracy(predict(with_permuted(holdout, c, perm)), y));
  }

  for (const auto& c : candidates) {
    Importance imp;
    imp.column = c;
    imp.drops = drops[c];
    const double n = static_cast<double>(imp.drops.size());
    imp.mean = std::accumulate(imp.drops.begin(), imp.drops.end(), 0.0) / n;
    double ss = 0.0;
    for (double d : imp.drops) ss += (d - imp.mean) * (d - imp.mean);
    imp.sd = imp.drops.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    table.rows.push_back(std::move(imp));
  }
  // Larger mean first; ties by mean - sd, then by name.
  std::sort(table.rows.begin(), table.rows.end(), [](const Importance& a, const Importance& b) {
    if (std::abs(a.mean - b.mean) > kTie) return a.mean > b.mean;
    const double la = a.mean - a.sd, lb = b.mean - b.sd;
    if (std::abs(la - lb) > kTie) return la > lb;
    return a.column < b.column;
  });
  for (std::size_t i = 0; i < table.rows.size(); ++i) table.rows[i].rank = static_cast<int>(i + 1);
  if (!table.rows.empty()) table.chosen = table.rows.front().column;
  if (table.rows.size() > 1 && std::abs(table.rows[0].mean - table.rows[1].mean) <= kTie) {
    table.tie = true;
    table.warnings.push_back(fmt::format("tie at the top between '{}' and '{}'; broken by mean - sd, then by name",
                                         table.rows[0].column, table.rows[1].column));
  }
  return table;
}

ImportanceTable extract_privilege_attribute(const Table& t, const ExtractionOptions& options) {
  if (options.repeats < 3) throw ConfigError("privilege extraction needs at least 3 repeats");
  if (!(options.holdout > 0.0 && options.holdout < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
  const Column& s = t.protected_column();
  const int code = s.code_of(options.group);
  if (code < 0) throw PredicateError("protected column '" + s.spec.name + "' has no group '" + options.group + "'");
  const auto candidates = privilege_candidates(t, options.exclude_effort);
  if (candidates.size() < 2) throw ConfigError("privilege extraction needs at least two numerical/ordinal candidates");

  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < t.rows(); ++i)
    if (s.codes[i] == code) rows.push_back(static_cast<Eigen::Index>(i));
  const Table group = t.subset(rows);

  std::vector<int> strata(group.rows());
  for (std::size_t i = 0; i < group.rows(); ++i) strata[i] = group.labels()[static_cast<Eigen::Index>(i)] > 0.5 ? 1 : 0;
  const Split split = stratified_split(strata, options.holdout, options.seed);
  const Table fit = group.subset(split.train);
  const Table holdout = group.subset(split.test);

  const Encoder encoder = Encoder::fit(fit);
  BaseParams base = options.base;
  base.seed = options.seed;
  const LogisticModel model = fit_base(encoder.transform(fit), fit.labels(), std::nullopt, base);
  const Predictor predict = [&](const Table& x) { return model.decide(encoder.transform(x)); };

  ImportanceTable table = permutation_importance(holdout, candidates, predict, options.repeats, options.seed);
  table.protected_column = s.spec.name;
  table.group = options.group;
  table.fit_rows = fit.rows();
  if (!model.converged) table.warnings.push_back("group model did not reach the gradient tolerance");
  for (const auto& w : encoder.warnings()) table.warnings.push_back(w);
  return table;
}

// Sweep -------------------------------------------------------------------------------

nlohmann::json SweepOptions::to_json() const {
  return {{"grid", grid}, {"ratio_rule", ratio_rule}, {"column", column}, {"advantaged", advantaged}};
}

SweepOptions SweepOptions::from_json(const nlohmann::json& j) {
  SweepOptions o;
  o.grid = j.value("grid", o.grid);
  o.ratio_rule = j.value("ratio_rule", o.ratio_rule);
  o.column = j.value("column", o.column);
  o.advantaged = j.value("advantaged", o.advantaged);
  return o;
}

nlohmann::json PSweepResult::to_json() const {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& r : rows)
    items.push_back({{"p", r.p},
                     {"tau", r.tau},
                     {"realized_fraction", r.realized_fraction},
                     {"support", r.support},
                     {"ppr", r.ppr},
                     {"ratio", r.ratio ? nlohmann::json(*r.ratio) : nlohmann::json()},
                     {"satisfies", r.satisfies},
                     {"note", r.note}});
  return {{"column", column},
          {"protected", protected_column},
          {"advantaged", advantaged},
          {"ratio_rule", ratio_rule},
          {"rows", items},
          {"satisfying", satisfying},
          {"selected", selected ? nlohmann::json(*selected) : nlohmann::json()},
          {"status", selected ? "selected" : "no p satisfies rule"}};
}

void PSweepResult::write_csv(std::ostream& out) const {
  std::vector<std::string> groups;
  if (!rows.empty())
    for (const auto& [g, v] : rows.front().support) groups.push_back(g);
  out << "p,tau,realized_fraction";
  for (const auto& g : groups) out << ",n_" << g << ",ppr_" << g;
  out << ",ratio,satisfies\n";
  for (const auto& r : rows) {
    out << format_number(r.p) << ',' << format_number(r.tau) << ',' << format_number(r.realized_fraction);
    for (const auto& g : groups) {
      out << ',' << r.support.at(g) << ',';
      if (auto it = r.ppr.find(g); it != r.ppr.end()) out << format_number(it->second);
    }
    out << ',' << (r.ratio ? format_number(*r.ratio) : std::string()) << ',' << (r.satisfies ? 1 : 0) << '\n';
  }
}

PSweepResult select_p(const Table& t, const SweepOptions& options) {
  if (options.grid.empty()) throw ConfigError("p grid is empty");
  if (!std::is_sorted(options.grid.begin(), options.grid.end()) ||
      std::adjacent_find(options.grid.begin(), options.grid.end()) != options.grid.end())
    throw ConfigError("p grid must be strictly ascending");
  if (!(options.ratio_rule > 0.0)) throw ConfigError("ratio rule must be positive");

  const Column& s = t.protected_column();
  const std::string column = options.column.empty() ? t.privilege_column().spec.name : options.column;
  const VecXd& y = t.labels();

  PSweepResult result;
  result.column = column;
  result.protected_column = s.spec.name;
  result.ratio_rule = options.ratio_rule;

  // Advantaged group: highest overall ground-truth PPR unless overridden.
  if (!options.advantaged.empty()) {
    if (s.code_of(options.advantaged) < 0)
      throw PredicateError("protected column '" + s.spec.name + "' has no group '" + options.advantaged + "'");
    result.advantaged = options.advantaged;
  } else {
    double best = -1.0;
    for (std::size_t g = 0; g < s.levels.size(); ++g) {
      const Mask m = mask(t, Predicate().equals(s.spec.name, s.levels[g]));
      const double k = static_cast<double>(count(m));
      const double ppr = k > 0 ? masked_sum(y, m) / k : 0.0;
      if (ppr > best) {
        best = ppr;
        result.advantaged = s.levels[g];
      }
    }
  }

  for (double p : options.grid) {
    const PrivilegeThreshold th = privilege_threshold(t, column, p);
    SweepRow row;
    row.p = p;
    row.tau = th.tau;
    row.realized_fraction = th.realized_fraction;
    const Mask top = mask(t, Predicate().at_least(column, th.tau));
    std::vector<std::string> missing;
    for (const auto& g : s.levels) {
      const Mask m = top && mask(t, Predicate().equals(s.spec.name, g));
      const Eigen::Index k = count(m);
      row.support[g] = k;
      if (k == 0) missing.push_back(g);
      else row.ppr[g] = masked_sum(y, m) / static_cast<double>(k);
    }
    if (!missing.empty()) {
      row.note = "no rows of group(s) in the top slice:";
      for (const auto& g : missing) row.note += " " + g;
    } else if (row.ppr.at(result.advantaged) == 0.0) {
      row.note = "advantaged group has PPR 0 in the top slice";
    } else {
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& [g, ppr] : row.ppr)
        if (g != result.advantaged) worst = std::min(worst, ppr / row.ppr.at(result.advantaged));
      row.ratio = worst;
      row.satisfies = worst >= options.ratio_rule;
    }
    if (row.satisfies) result.satisfying.push_back(p);
    result.rows.push_back(std::move(row));
  }
  if (!result.satisfying.empty()) result.selected = result.satisfying.front();
  return result;
}

}  // namespace fairsep
