#include "fairsep/notions.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace fairsep {

std::string to_string(NotionKind kind) {
  switch (kind) {
    case NotionKind::EP: return "EP";
    case NotionKind::DP: return "DP";
    case NotionKind::CDP: return "CDP";
    case NotionKind::SEP: return "SEP";
    case NotionKind::CSEP: return "CSEP";
    case NotionKind::SEPRelaxed: return "SEP_relaxed";
  }
  return "?";
}

NotionKind notion_kind_from_string(const std::string& name) {
  std::string n;
  std::transform(name.begin(), name.end(), std::back_inserter(n), [](unsigned char c) { return std::toupper(c); });
  if (n == "EP" || n == "EO" || n == "EQUAL_OPPORTUNITY") return NotionKind::EP;
  if (n == "DP") return NotionKind::DP;
  if (n == "CDP") return NotionKind::CDP;
  if (n == "SEP") return NotionKind::SEP;
  if (n == "CSEP") return NotionKind::CSEP;
  if (n == "SEP_RELAXED" || n == "SEP-RELAXED" || n == "RELAXED_SEP") return NotionKind::SEPRelaxed;
  throw ConfigError("unknown notion '" + name + "'");
}

// Config -------------------------------------------------------------------------

nlohmann::json NotionConfig::to_json() const {
  nlohmann::json j{{"kind", fairsep::to_string(kind)},
                   {"p", p},
                   {"effort_scope", fairsep::to_string(effort_scope)},
                   {"zeta",
                    {{"kind", weighting.kind == ZetaKind::Unit ? "unit" : "linear_capped"}, {"cap", weighting.cap}}},
                   {"t3_normalizer", t3 == T3Normalizer::Subset ? "subset" : "literal"},
                   {"epsilon", epsilon},
                   {"mode", fairsep::to_string(rates.mode)},
                   {"cutoff", rates.cutoff}};
  if (!protected_column.empty()) j["protected"] = protected_column;
  if (!groups.empty()) j["groups"] = groups;
  if (!conditional_column.empty()) j["conditional"] = conditional_column;
  if (!privilege_column.empty()) j["privilege"] = privilege_column;
  if (!effort_column.empty()) j["effort"] = effort_column;
  if (tau) j["tau"] = *tau;
  return j;
}

NotionConfig NotionConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> keys = {"kind",   "protected",     "groups", "conditional",   "privilege",
                                             "p",      "tau",           "effort", "effort_scope",  "zeta",
                                             "mode",   "t3_normalizer", "cutoff", "epsilon"};
  if (j.is_object())
    for (const auto& [k, v] : j.items())
      if (!keys.count(k)) throw ConfigError("unknown notion key '" + k + "'");
  NotionConfig c;
  try {
    if (j.contains("kind")) c.kind = notion_kind_from_string(j["kind"].get<std::string>());
    c.protected_column = j.value("protected", std::string{});
    if (j.contains("groups")) c.groups = j["groups"].get<std::vector<std::string>>();
    c.conditional_column = j.value("conditional", std::string{});
    c.privilege_column = j.value("privilege", std::string{});
    c.p = j.value("p", c.p);
    if (j.contains("tau") && !j["tau"].is_null()) c.tau = j["tau"].get<double>();
    c.effort_column = j.value("effort", std::string{});
    if (j.contains("effort_scope")) c.effort_scope = effort_scope_from_string(j["effort_scope"].get<std::string>());
    if (j.contains("zeta")) {
      const auto& z = j["zeta"];
      auto kind = z.value("kind", std::string{"linear_capped"});
      if (kind == "unit") c.weighting.kind = ZetaKind::Unit;
      else if (kind == "linear_capped") c.weighting.kind = ZetaKind::LinearCapped;
      else throw ConfigError("unknown zeta kind '" + kind + "'");
      c.weighting.cap = z.value("cap", c.weighting.cap);
    }
    if (j.contains("t3_normalizer")) {
      auto t3 = j["t3_normalizer"].get<std::string>();
      if (t3 == "subset") c.t3 = T3Normalizer::Subset;
      else if (t3 == "literal") c.t3 = T3Normalizer::Literal;
      else throw ConfigError("unknown t3_normalizer '" + t3 + "'");
    }
    c.epsilon = j.value("epsilon", c.epsilon);
    if (j.contains("mode")) c.rates.mode = rate_mode_from_string(j["mode"].get<std::string>());
    c.rates.cutoff = j.value("cutoff", c.rates.cutoff);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid notion config: ") + e.what());
  }
  if (c.epsilon < 0.0) throw ConfigError("epsilon must be non-negative");
  if (c.weighting.cap < 1.0) throw ConfigError("zeta cap must be at least 1");
  return c;
}

// Context ------------------------------------------------------------------------

NotionContext prepare(const Table& t, const NotionConfig& config) {
  NotionContext ctx;
  ctx.table = &t;
  ctx.config = config;
  auto& cfg = ctx.config;
  const auto n = static_cast<Eigen::Index>(t.rows());

  if (cfg.epsilon < 0.0) throw ConfigError("epsilon must be non-negative");
  if (cfg.weighting.cap < 1.0) throw ConfigError("zeta cap must be at least 1");

  if (cfg.protected_column.empty()) cfg.protected_column = t.protected_column().spec.name;
  const auto& prot = t.column(cfg.protected_column);
  if (!prot.spec.is_categorical() || prot.spec.kind == ColumnKind::Target)
    throw ConfigError("protected column must be categorical: " + cfg.protected_column);
  if (cfg.groups.empty()) cfg.groups = prot.levels;
  for (const auto& g : cfg.groups) {
    if (prot.code_of(g) < 0) throw ConfigError("protected column has no group '" + g + "'");
    ctx.groups.push_back(g);
    ctx.group_masks.push_back(mask(t, Predicate{}.equals(cfg.protected_column, g)));
  }

  if (cfg.conditional()) {
    if (cfg.conditional_column.empty()) throw ConfigError(to_string(cfg.kind) + " needs a conditional column");
    const auto& cond = t.column(cfg.conditional_column);
    if (!cond.spec.is_categorical() || cond.spec.kind != ColumnKind::Categorical)
      throw ConfigError("conditional column must be an unprotected categorical column: " + cfg.conditional_column);
    for (const auto& a : cond.levels) {
      ctx.categories.push_back(a);
      ctx.category_masks.push_back(mask(t, Predicate{}.equals(cfg.conditional_column, a)));
    }
  } else {
    ctx.categories.push_back("*");
    ctx.category_masks.push_back(all_rows(n));
  }

  if (cfg.needs_privilege()) {
    if (cfg.privilege_column.empty()) cfg.privilege_column = t.privilege_column().spec.name;
    if (cfg.tau) {
      const auto& x = t.column(cfg.privilege_column).values;
      const double share = n ? static_cast<double>((x.array() >= *cfg.tau).count()) / static_cast<double>(n) : 0.0;
      ctx.privilege = PrivilegeThreshold{cfg.privilege_column, cfg.p, *cfg.tau, share};
    } else {
      ctx.privilege = privilege_threshold(t, cfg.privilege_column, cfg.p);
    }
    ctx.privileged = mask(t, Predicate{}.at_least(cfg.privilege_column, ctx.privilege->tau));
  }

  if (cfg.needs_effort()) {
    if (cfg.effort_column.empty()) cfg.effort_column = t.effort_column().spec.name;
    if (cfg.kind == NotionKind::CSEP &&
        (cfg.conditional_column == cfg.privilege_column || cfg.conditional_column == cfg.effort_column))
      throw ConfigError("CSEP conditional column must differ from the privilege and effort columns");
    if (cfg.effort_scope == EffortScope::PerCategoryGroup && cfg.conditional_column.empty())
      throw ConfigError("per_category_group effort scope needs a conditional column");
    ctx.effort = effort_threshold(t, cfg.effort_scope, cfg.conditional_column, cfg.effort_column,
                                  cfg.protected_column);
    ctx.effort_cutoff = ctx.effort->per_row(t);
    ctx.high = mask(t, Predicate{}.at_least(cfg.effort_column, ctx.effort_cutoff));
  }
  return ctx;
}

VecXd NotionContext::zeta_weights(const Mask& cell, bool* flat) const {
  const auto n = cell.size();
  VecXd w = VecXd::Ones(n);
  if (!effort) return w;
  const auto& x = table->column(config.effort_column).values;
  bool any = false;
  double cell_max = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!cell[i]) continue;
    cell_max = any ? std::max(cell_max, x[i]) : x[i];
    any = true;
  }
  if (!any) return w;
  for (Eigen::Index i = 0; i < n; ++i)
    if (cell[i] && high[i]) w[i] = zeta(config.weighting, x[i], effort_cutoff[i], cell_max, flat);
  return w;
}

// Metrics ------------------------------------------------------------------------

namespace {

void require_kind(const NotionConfig& cfg, NotionKind expected) {
  if (cfg.kind != expected)
    throw ConfigError("expected a " + to_string(expected) + " config, got " + to_string(cfg.kind));
}

struct Rate {
  double value = 0.0;
  Eigen::Index n = 0;
  bool defined() const { return n > 0; }
};

Rate rate(const VecXd& pos, const Mask& rows) {
  Rate r;
  r.n = count(rows);
  if (r.n) r.value = masked_sum(pos, rows) / static_cast<double>(r.n);
  return r;
}

std::string cell_label(const NotionContext& ctx, std::size_t a, std::size_t s) {
  if (!ctx.config.conditional()) return ctx.config.protected_column + "=" + ctx.groups[s];
  return ctx.config.conditional_column + "=" + ctx.categories[a] + "|" + ctx.config.protected_column + "=" +
         ctx.groups[s];
}

void add_term(GroupTerms& g, std::optional<double>& slot, double value) {
  slot = value;
  g.total += value;
}

// Parity of a rate between a universe and one group's slice of it. `base`
// restricts both sides (Y=1 for EP, nothing otherwise).
GroupTerms parity_terms(const VecXd& pos, const Mask& universe, const Mask& group, const Mask& base,
                        const std::string& label, std::vector<std::string>& skipped) {
  GroupTerms g;
  const Mask u = universe && base;
  const Mask cell = u && group;
  const Rate overall = rate(pos, u);
  const Rate sub = rate(pos, cell);
  g.support = count(universe && group);
  g.denominators.n = static_cast<double>(sub.n);
  if (!overall.defined() || !sub.defined()) {
    skipped.push_back(label + ": T1 (empty subgroup)");
    return g;
  }
  add_term(g, g.t1, std::abs(overall.value - sub.value));
  return g;
}

GroupTerms sep_terms(const NotionContext& ctx, const VecXd& pos, const VecXd& neg, const Mask& universe,
                     const Mask& group, bool full, const std::string& label, std::vector<std::string>& skipped,
                     bool& flat) {
  GroupTerms g;
  const Mask cell = universe && group;
  const Mask under = cell && !ctx.privileged;
  g.support = count(cell);

  const Rate overall = rate(pos, universe);
  const Rate sub = rate(pos, under);
  g.denominators.n = static_cast<double>(sub.n);
  if (overall.defined() && sub.defined()) add_term(g, g.t1, std::abs(overall.value - sub.value));
  else skipped.push_back(label + ": T1 (no underprivileged rows)");
  if (!full) return g;

  const VecXd weights = ctx.zeta_weights(cell, &flat);
  const VecXd& y = ctx.table->labels();
  const Mask low = under && !ctx.high;
  const Mask high = under && ctx.high;
  const Mask negatives = (y.array() < 0.5);

  const double A = static_cast<double>(count(low));
  const double B = masked_sum(weights, high);
  g.denominators.A = A;
  g.denominators.B = B;
  if (A > 0.0 && B > 0.0) {
    const double low_neg = masked_sum(neg, low) / A;
    const double high_neg = masked_dot(weights, neg, high) / B;
    add_term(g, g.t2, std::abs(low_neg - high_neg));
  } else {
    skipped.push_back(label + (A > 0.0 ? ": T2 (B=0)" : ": T2 (A=0)"));
  }

  const Mask priv_neg = universe && ctx.privileged && negatives;
  const Mask high_neg_rows = high && negatives;
  const double C = static_cast<double>(count(priv_neg));
  const double B0 = masked_sum(weights, high_neg_rows);
  g.denominators.C = C;
  g.denominators.B0 = B0;
  const double norm = ctx.config.t3 == T3Normalizer::Subset ? B0 : B;
  if (C > 0.0 && B0 > 0.0) {
    const double priv_rate = masked_sum(neg, priv_neg) / C;
    const double high_rate = masked_dot(weights, neg, high_neg_rows) / norm;
    add_term(g, g.t3, std::abs(priv_rate - high_rate));
  } else {
    skipped.push_back(label + (C > 0.0 ? ": T3 (B0=0)" : ": T3 (C=0)"));
  }
  return g;
}

void finalize(ViolationReport& r, const NotionContext& ctx) {
  double worst = 0.0;
  double mass = 0.0;
  double weighted = 0.0;
  auto visit = [&](const GroupTerms& g) {
    worst = std::max(worst, g.total);
    if (g.t1 || g.t2 || g.t3) {
      weighted += static_cast<double>(g.support) * g.total;
      mass += static_cast<double>(g.support);
    }
  };
  for (const auto& [_, g] : r.groups) visit(g);
  for (auto& [_, cat] : r.categories) {
    cat.aggregate = 0.0;
    for (const auto& [__, g] : cat.groups) {
      visit(g);
      cat.aggregate = std::max(cat.aggregate, g.total);
    }
  }
  r.aggregate = worst;
  r.weighted_mean = mass > 0.0 ? weighted / mass : 0.0;
  r.pass = r.aggregate <= r.epsilon;
  r.partial = !r.skipped.empty();
  r.privilege = ctx.privilege;
  r.effort = ctx.effort;
}

ViolationReport start(const NotionContext& ctx) {
  ViolationReport r;
  r.notion = ctx.config.kind;
  r.epsilon = ctx.config.epsilon;
  r.rates = ctx.config.rates;
  return r;
}

ViolationReport parity_report(const NotionContext& ctx, const VecXd& scores) {
  const auto& t = *ctx.table;
  check_predictions(t, scores);
  const VecXd pos = positive_values(scores, ctx.config.rates);
  const auto n = static_cast<Eigen::Index>(t.rows());
  const Mask base = ctx.config.kind == NotionKind::EP ? Mask(t.labels().array() > 0.5) : all_rows(n);
  ViolationReport r = start(ctx);
  for (std::size_t a = 0; a < ctx.categories.size(); ++a) {
    CategoryRecord cat;
    cat.support = count(ctx.category_masks[a]);
    for (std::size_t s = 0; s < ctx.groups.size(); ++s) {
      auto g = parity_terms(pos, ctx.category_masks[a], ctx.group_masks[s], base, cell_label(ctx, a, s), r.skipped);
      if (ctx.config.conditional()) cat.groups[ctx.groups[s]] = g;
      else r.groups[ctx.groups[s]] = g;
    }
    if (ctx.config.conditional()) r.categories[ctx.categories[a]] = std::move(cat);
  }
  finalize(r, ctx);
  return r;
}

ViolationReport sep_report(const NotionContext& ctx, const VecXd& scores, bool full) {
  const auto& t = *ctx.table;
  check_predictions(t, scores);
  const VecXd pos = positive_values(scores, ctx.config.rates);
  const VecXd neg = VecXd::Ones(pos.size()) - pos;
  ViolationReport r = start(ctx);
  bool flat = false;
  for (std::size_t a = 0; a < ctx.categories.size(); ++a) {
    CategoryRecord cat;
    cat.support = count(ctx.category_masks[a]);
    for (std::size_t s = 0; s < ctx.groups.size(); ++s) {
      auto g = sep_terms(ctx, pos, neg, ctx.category_masks[a], ctx.group_masks[s], full, cell_label(ctx, a, s),
                         r.skipped, flat);
      if (ctx.config.conditional()) cat.groups[ctx.groups[s]] = g;
      else r.groups[ctx.groups[s]] = g;
    }
    if (ctx.config.conditional()) r.categories[ctx.categories[a]] = std::move(cat);
  }
  if (flat) r.warnings.push_back("effort weighting is flat in at least one cell (no effort above threshold); zeta = 1");
  if (ctx.effort && !ctx.effort->fallbacks.empty())
    r.warnings.push_back(fmt::format("{} effort cells with fewer than 2 rows inherited the parent mean",
                                     ctx.effort->fallbacks.size()));
  finalize(r, ctx);
  return r;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json group_json(const GroupTerms& g) {
  nlohmann::json den = nlohmann::json::object();
  if (g.denominators.n) den["n"] = *g.denominators.n;
  if (g.denominators.A) den["A"] = *g.denominators.A;
  if (g.denominators.B) den["B"] = *g.denominators.B;
  if (g.denominators.B0) den["B0"] = *g.denominators.B0;
  if (g.denominators.C) den["C"] = *g.denominators.C;
  return {{"T1", optional_json(g.t1)},
          {"T2", optional_json(g.t2)},
          {"T3", optional_json(g.t3)},
          {"total", g.total},
          {"support", g.support},
          {"denominators", den}};
}

}  // namespace

ViolationReport ep_violation(const Table& t, const VecXd& scores, const NotionConfig& cfg) {
  require_kind(cfg, NotionKind::EP);
  return parity_report(prepare(t, cfg), scores);
}

ViolationReport dp_violation(const Table& t, const VecXd& scores, const NotionConfig& cfg) {
  require_kind(cfg, NotionKind::DP);
  return parity_report(prepare(t, cfg), scores);
}

ViolationReport cdp_violation(const Table& t, const VecXd& scores, const NotionConfig& cfg) {
  require_kind(cfg, NotionKind::CDP);
  return parity_report(prepare(t, cfg), scores);
}

ViolationReport sep_violation(const Table& t, const VecXd& scores, const NotionConfig& cfg) {
  require_kind(cfg, NotionKind::SEP);
  return sep_report(prepare(t, cfg), scores, true);
}

ViolationReport csep_violation(const Table& t, const VecXd& scores, const NotionConfig& cfg) {
  require_kind(cfg, NotionKind::CSEP);
  return sep_report(prepare(t, cfg), scores, true);
}

ViolationReport sep_relaxed(const Table& t, const VecXd& scores, const NotionConfig& cfg) {
  require_kind(cfg, NotionKind::SEPRelaxed);
  return sep_report(prepare(t, cfg), scores, false);
}

ViolationReport evaluate(const Table& t, const VecXd& scores, const NotionConfig& cfg) {
  return evaluate(prepare(t, cfg), scores);
}

ViolationReport evaluate(const NotionContext& ctx, const VecXd& scores) {
  switch (ctx.config.kind) {
    case NotionKind::EP:
    case NotionKind::DP:
    case NotionKind::CDP: return parity_report(ctx, scores);
    case NotionKind::SEP:
    case NotionKind::CSEP: return sep_report(ctx, scores, true);
    case NotionKind::SEPRelaxed: return sep_report(ctx, scores, false);
  }
  throw ConfigError("unknown notion");
}

nlohmann::json ViolationReport::to_json() const {
  nlohmann::json groups_json = nlohmann::json::object();
  for (const auto& [s, g] : groups) groups_json[s] = group_json(g);
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [a, cat] : categories) {
    nlohmann::json cg = nlohmann::json::object();
    for (const auto& [s, g] : cat.groups) cg[s] = group_json(g);
    cats[a] = {{"aggregate", cat.aggregate}, {"support", cat.support}, {"groups", cg}};
  }
  nlohmann::json thresholds = nlohmann::json::object();
  if (privilege)
    thresholds["privilege"] = {{"column", privilege->column},
                               {"p", privilege->p},
                               {"tau", privilege->tau},
                               {"realized_fraction", privilege->realized_fraction}};
  if (effort) {
    nlohmann::json per_group = nlohmann::json::object();
    for (const auto& [g, v] : effort->per_group) per_group[g] = v;
    nlohmann::json per_cell = nlohmann::json::object();
    for (const auto& [k, v] : effort->per_cell) per_cell[k.first + "|" + k.second] = v;
    thresholds["effort"] = {{"column", effort->column},     {"scope", fairsep::to_string(effort->scope)},
                            {"global", effort->global},     {"per_group", per_group},
                            {"per_cell", per_cell},         {"fallbacks", effort->fallbacks}};
  }
  return {{"notion", fairsep::to_string(notion)},
          {"epsilon", epsilon},
          {"mode", fairsep::to_string(rates.mode)},
          {"cutoff", rates.cutoff},
          {"aggregate", aggregate},
          {"weighted_mean", weighted_mean},
          {"pass", pass},
          {"partial", partial},
          {"groups", groups_json},
          {"categories", cats},
          {"skipped", skipped},
          {"warnings", warnings},
          {"thresholds", thresholds}};
}

}  // namespace fairsep
