#include "fairsep/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace fairsep {

namespace {

constexpr const char* kPalette[] = {"#4e79a7", "#a0cbe8", "#f28e2b", "#ffbe7d", "#59a14f",
                                    "#8cd17d", "#b6992d", "#e15759", "#79706e", "#d37295"};
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) { return fmt::format("{:.2f}", v); }

const char* color(std::size_t i) { return kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))]; }

double data_max(const std::vector<const Chart*>& charts) {
  double m = 0.0;
  for (const Chart* c : charts) {
    if (c->y_max) m = std::max(m, *c->y_max);
    for (const auto& s : c->series)
      for (double v : s.values)
        if (std::isfinite(v)) m = std::max(m, v);
    if (c->reference_line) m = std::max(m, *c->reference_line);
  }
  return m > 0.0 ? m : 1.0;
}

// A "nice" upper bound for the axis: 1, 2 or 5 times a power of ten.
double nice_ceiling(double v) {
  const double mag = std::pow(10.0, std::floor(std::log10(v)));
  for (double f : {1.0, 2.0, 5.0, 10.0})
    if (f * mag >= v - 1e-12) return f * mag;
  return 10.0 * mag;
}

struct Frame {
  double x, y, w, h, y_max;
};

void axes(std::string& out, const Chart& c, const Frame& f) {
  out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>\n", num(f.x), num(f.y + f.h),
                     num(f.x + f.w), num(f.y + f.h));
  out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>\n", num(f.x), num(f.y), num(f.x),
                     num(f.y + f.h));
  for (int k = 0; k <= 5; ++k) {
    const double v = f.y_max * k / 5.0;
    const double yy = f.y + f.h - f.h * k / 5.0;
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n", num(f.x), num(yy),
                       num(f.x + f.w), num(yy));
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n", num(f.x - 4),
                       num(yy + 3), fmt::format("{:g}", std::round(v * 1000.0) / 1000.0));
  }
  if (c.reference_line) {
    const double yy = f.y + f.h - f.h * (*c.reference_line / f.y_max);
    out += fmt::format(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#c00\" stroke-dasharray=\"4 3\"/>\n", num(f.x), num(yy),
        num(f.x + f.w), num(yy));
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 {} {})\">{}</text>\n",
                     num(f.x - 36), num(f.y + f.h / 2), num(f.x - 36), num(f.y + f.h / 2), escape(c.y_label));
}

void category_labels(std::string& out, const Chart& c, const Frame& f, double slot) {
  for (std::size_t i = 0; i < c.categories.size(); ++i) {
    const double cx = f.x + slot * (static_cast<double>(i) + 0.5);
    const double cy = f.y + f.h + 12;
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\" transform=\"rotate(-40 {} {})\">{}</text>\n",
                       num(cx), num(cy), num(cx), num(cy), escape(c.categories[i]));
  }
}

void legend(std::string& out, const std::vector<Series>& series, double x, double y) {
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double yy = y + 14.0 * static_cast<double>(s);
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", num(x), num(yy), color(s));
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n", num(x + 14), num(yy + 9),
                       escape(series[s].label));
  }
}

void bars(std::string& out, const Chart& c, const Frame& f) {
  axes(out, c, f);
  const double slot = c.categories.empty() ? f.w : f.w / static_cast<double>(c.categories.size());
  const double bar = c.series.empty() ? 0.0 : slot * 0.8 / static_cast<double>(c.series.size());
  for (std::size_t i = 0; i < c.categories.size(); ++i) {
    for (std::size_t s = 0; s < c.series.size(); ++s) {
      const double v = c.series[s].values[i];
      if (!std::isfinite(v)) continue;
      const double h = f.h * std::min(v / f.y_max, 1.0);
      const double x = f.x + slot * static_cast<double>(i) + slot * 0.1 + bar * static_cast<double>(s);
      out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"><title>{}: {}</title></rect>\n",
                         num(x), num(f.y + f.h - h), num(bar), num(h), color(s), escape(c.series[s].label),
                         fmt::format("{:.4f}", v));
    }
  }
  category_labels(out, c, f, slot);
}

std::string open_svg(double w, double h) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      num(w), num(h), num(w), num(h));
}

void title_and_notes(std::string& out, const std::string& title, const std::vector<std::string>& notes, double w,
                     double notes_y) {
  out += fmt::format("<text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n", num(w / 2),
                     escape(title));
  for (std::size_t i = 0; i < notes.size(); ++i)
    out += fmt::format("<text x=\"10\" y=\"{}\" font-size=\"10\" fill=\"#555\">{}</text>\n",
                       num(notes_y + 13.0 * static_cast<double>(i)), escape(notes[i]));
}

void validate(const Chart& c) {
  for (const auto& s : c.series)
    if (s.values.size() != c.categories.size())
      throw Error("series '" + s.label + "' does not match the category count");
}

Mask group_mask(const Column& s, const std::string& level) {
  const int code = s.code_of(level);
  Mask m(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) m[static_cast<Eigen::Index>(i)] = s.codes[i] == code;
  return m;
}

}  // namespace

// Rendering ------------------------------------------------------------------------

std::string render_bars(const Chart& chart) {
  validate(chart);
  const double plot_w = std::max(360.0, 18.0 * static_cast<double>(chart.categories.size() * std::max<std::size_t>(chart.series.size(), 1)));
  const double w = plot_w + 240.0;
  const double h = 420.0 + 13.0 * static_cast<double>(chart.notes.size());
  const Frame f{70.0, 40.0, plot_w, 250.0, nice_ceiling(data_max({&chart}))};
  std::string out = open_svg(w, h);
  bars(out, chart, f);
  legend(out, chart.series, f.x + f.w + 20, f.y);
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n", num(f.x + f.w / 2),
                     num(h - 20 - 13.0 * static_cast<double>(chart.notes.size())), escape(chart.x_label));
  title_and_notes(out, chart.title, chart.notes, w, h - 8 - 13.0 * static_cast<double>(chart.notes.size()) + 13.0);
  out += "</svg>\n";
  return out;
}

std::string render_lines(const Chart& chart) {
  validate(chart);
  const double plot_w = std::max(360.0, 60.0 * static_cast<double>(chart.categories.size()));
  const double w = plot_w + 240.0;
  const double h = 400.0 + 13.0 * static_cast<double>(chart.notes.size());
  const Frame f{70.0, 40.0, plot_w, 250.0, nice_ceiling(data_max({&chart}))};
  std::string out = open_svg(w, h);
  axes(out, chart, f);
  const double slot = chart.categories.empty() ? f.w : f.w / static_cast<double>(chart.categories.size());
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    std::string path;
    bool pen = false;
    for (std::size_t i = 0; i < chart.categories.size(); ++i) {
      const double v = chart.series[s].values[i];
      if (!std::isfinite(v)) {
        pen = false;
        continue;
      }
      const double x = f.x + slot * (static_cast<double>(i) + 0.5);
      const double y = f.y + f.h - f.h * std::min(v / f.y_max, 1.0);
      path += fmt::format("{}{} {} ", pen ? "L" : "M", num(x), num(y));
      pen = true;
      out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"><title>{}: {}</title></circle>\n", num(x),
                         num(y), color(s), escape(chart.series[s].label), fmt::format("{:.4f}", v));
    }
    if (!path.empty())
      out += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", path.substr(0, path.size() - 1),
                         color(s));
  }
  category_labels(out, chart, f, slot);
  legend(out, chart.series, f.x + f.w + 20, f.y);
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n", num(f.x + f.w / 2),
                     num(f.y + f.h + 70), escape(chart.x_label));
  title_and_notes(out, chart.title, chart.notes, w, f.y + f.h + 95);
  out += "</svg>\n";
  return out;
}

std::string render_panels(const PanelChart& chart) {
  std::vector<const Chart*> all;
  for (const auto& p : chart.panels) {
    validate(p);
    all.push_back(&p);
  }
  const double y_max = nice_ceiling(data_max(all));
  const double panel_w = 220.0;
  const double w = 70.0 + (panel_w + 70.0) * static_cast<double>(std::max<std::size_t>(chart.panels.size(), 1)) + 140.0;
  std::vector<std::string> notes;
  for (const auto& p : chart.panels)
    for (const auto& n : p.notes) notes.push_back(p.title + ": " + n);
  const double h = 380.0 + 13.0 * static_cast<double>(notes.size());
  std::string out = open_svg(w, h);
  for (std::size_t i = 0; i < chart.panels.size(); ++i) {
    const Frame f{70.0 + (panel_w + 70.0) * static_cast<double>(i), 60.0, panel_w, 220.0, y_max};
    bars(out, chart.panels[i], f);
    out += fmt::format("<text x=\"{}\" y=\"50\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                       num(f.x + f.w / 2), escape(chart.panels[i].title));
  }
  if (!chart.panels.empty()) legend(out, chart.panels.front().series, w - 130.0, 60.0);
  title_and_notes(out, chart.title, notes, w, 350.0);
  out += "</svg>\n";
  return out;
}

// Figures ----------------------------------------------------------------------------

std::vector<std::string> groups_by_advantage(const Table& t) {
  const Column& s = t.protected_column();
  const VecXd& y = t.labels();
  std::vector<std::string> order = s.levels;
  std::vector<double> ppr;
  for (const auto& g : order) {
    const Mask m = group_mask(s, g);
    const auto k = count(m);
    ppr.push_back(k ? masked_sum(y, m) / static_cast<double>(k) : 0.0);
  }
  std::vector<std::size_t> idx(order.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ppr[a] > ppr[b]; });
  std::vector<std::string> out;
  out.push_back(order[idx.front()]);
  for (std::size_t i = 0; i < order.size(); ++i)
    if (i != idx.front()) out.push_back(order[i]);
  return out;
}

Chart grouped_bars_by_category(const Table& t, const VecXd& scores, const std::string& category_column,
                               const RateOptions& rates, const std::string& title) {
  check_predictions(t, scores);
  const Column& cat = t.column(category_column);
  if (!cat.spec.is_categorical()) throw ConfigError("'" + category_column + "' is not categorical");
  const Column& s = t.protected_column();
  const VecXd& y = t.labels();
  const VecXd pos = positive_values(scores, rates);

  Chart chart;
  chart.title = title;
  chart.x_label = category_column + " (ascending by ground-truth positives)";
  chart.y_label = "count";

  std::vector<std::pair<double, std::string>> order;
  for (const auto& level : cat.levels) {
    const Mask m = group_mask(cat, level);
    if (count(m) == 0) continue;
    order.emplace_back(masked_sum(y, m), level);
  }
  std::sort(order.begin(), order.end());
  for (const auto& [k, level] : order) chart.categories.push_back(level);
  if (chart.categories.empty()) chart.notes.push_back("no categories to plot");

  for (const auto& g : s.levels) {
    Series positive{g + " predicted positive", {}};
    Series negative{g + " predicted negative", {}};
    const Mask gm = group_mask(s, g);
    for (const auto& level : chart.categories) {
      const Mask m = gm && group_mask(cat, level);
      const double p = masked_sum(pos, m);
      positive.values.push_back(p);
      negative.values.push_back(static_cast<double>(count(m)) - p);
    }
    chart.series.push_back(std::move(positive));
    chart.series.push_back(std::move(negative));
  }
  chart.notes.push_back(fmt::format("predictions counted in {} mode", to_string(rates.mode)));
  return chart;
}

PanelChart subgroup_panels(const Table& t, const VecXd& scores, double p, const RateOptions& rates,
                           const std::string& title) {
  check_predictions(t, scores);
  const Column& s = t.protected_column();
  const PrivilegeThreshold th = privilege_threshold(t, p);
  const EffortThresholds eff = effort_threshold(t, EffortScope::PerGroup);
  const VecXd cutoff = eff.per_row(t);
  const std::string xp = th.column;
  const std::string xe = eff.column;

  struct Sub {
    std::string name;
    Predicate pred;
  };
  const std::vector<Sub> subs = {
      {"privileged", Predicate().at_least(xp, th.tau)},
      {"underprivileged", Predicate().below(xp, th.tau)},
      {"underprivileged, high effort", Predicate().below(xp, th.tau).at_least(xe, cutoff)},
  };

  PanelChart out;
  out.title = fmt::format("{} (privileged: {} >= {:g}, top {:g}%; high effort: {} >= group mean)", title, xp, th.tau,
                          p, xe);
  for (const auto& sub : subs) {
    Chart panel;
    panel.title = sub.name;
    panel.categories = {"PPR", "TPR", "FPR"};
    panel.y_label = "rate";
    for (const auto& g : s.levels) {
      Predicate pred = sub.pred;
      pred.equals(s.spec.name, g);
      const SubgroupFrame fr = stats(t, scores, pred, rates);
      Series series{g, {fr.empty ? kNaN : fr.ppr, fr.tpr_defined ? fr.tpr : kNaN, fr.fpr_defined ? fr.fpr : kNaN}};
      if (fr.empty) panel.notes.push_back(g + " has no rows");
      else {
        if (!fr.tpr_defined) panel.notes.push_back(g + ": TPR undefined (no positives)");
        if (!fr.fpr_defined) panel.notes.push_back(g + ": FPR undefined (no negatives)");
      }
      panel.series.push_back(std::move(series));
    }
    out.panels.push_back(std::move(panel));
  }
  return out;
}

Chart ppr_ratio_by_effort(const Table& t, const std::vector<EffortSeries>& models, double p,
                          const std::vector<double>& edges, const RateOptions& rates) {
  if (!std::is_sorted(edges.begin(), edges.end())) throw ConfigError("effort bin edges must be ascending");
  const Column& s = t.protected_column();
  const auto groups = groups_by_advantage(t);
  if (groups.size() < 2) throw DegenerateError("ratio chart needs two protected groups");
  const std::string& adv = groups[0];
  const std::string& dis = groups[1];
  const PrivilegeThreshold th = privilege_threshold(t, p);
  const Column& effort = t.effort_column();

  Chart chart;
  chart.title = fmt::format("PPR {}/{} among underprivileged ({} < {:g}) by {}", dis, adv, th.column, th.tau,
                            effort.spec.name);
  chart.x_label = effort.spec.name;
  chart.y_label = fmt::format("PPR ratio {}/{}", dis, adv);
  chart.reference_line = 1.0;

  std::vector<std::pair<double, double>> bins;
  const double inf = std::numeric_limits<double>::infinity();
  double lo = -inf;
  for (double e : edges) {
    bins.emplace_back(lo, e);
    lo = e;
  }
  bins.emplace_back(lo, inf);
  for (const auto& [a, b] : bins) {
    if (a == -inf && b == inf) chart.categories.push_back("all");
    else if (a == -inf) chart.categories.push_back(fmt::format("<{:g}", b));
    else if (b == inf) chart.categories.push_back(fmt::format(">={:g}", a));
    else chart.categories.push_back(fmt::format("{:g}-{:g}", a, b));
  }

  const Mask under = mask(t, Predicate().below(th.column, th.tau));
  const Mask adv_mask = group_mask(s, adv) && under;
  const Mask dis_mask = group_mask(s, dis) && under;
  const auto& x = effort.values.array();
  for (const auto& model : models) {
    check_predictions(t, model.scores);
    const VecXd pos = positive_values(model.scores, rates);
    Series series{model.label, {}};
    for (std::size_t i = 0; i < bins.size(); ++i) {
      const Mask in = (x >= bins[i].first) && (x < bins[i].second);
      const Mask ma = adv_mask && in, md = dis_mask && in;
      const auto na = count(ma), nd = count(md);
      const double pa = na ? masked_sum(pos, ma) / static_cast<double>(na) : 0.0;
      if (na == 0 || nd == 0 || pa == 0.0) {
        series.values.push_back(kNaN);
        chart.notes.push_back(fmt::format("{}: ratio undefined in bin {}", model.label, chart.categories[i]));
        continue;
      }
      series.values.push_back(masked_sum(pos, md) / static_cast<double>(nd) / pa);
    }
    chart.series.push_back(std::move(series));
  }
  if (models.empty()) chart.notes.push_back("no prediction series supplied");
  return chart;
}

}  // namespace fairsep
