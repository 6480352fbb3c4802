#pragma once

#include "fairsep/dataset.hpp"
#include "fairsep/groupstats.hpp"
#include "fairsep/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fairsep {

// Chart models ------------------------------------------------------------------

struct Series {
  std::string label;
  std::vector<double> values;  // one per category; NaN leaves a gap
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> categories;
  std::vector<Series> series;
  std::optional<double> y_max;           // default: data maximum
  std::optional<double> reference_line;  // horizontal rule, e.g. ratio 1
  std::vector<std::string> notes;        // printed under the plot
};

/// A row of small bar charts sharing one y scale.
struct PanelChart {
  std::string title;
  std::vector<Chart> panels;
};

/// Static SVG documents. Output depends only on the input (fixed number
/// formatting, no timestamps), so equal inputs give byte-identical files.
std::string render_bars(const Chart& chart);
std::string render_lines(const Chart& chart);
std::string render_panels(const PanelChart& chart);

// Figure builders ------------------------------------------------------------------

/// Predicted positive / negative counts per category and protected group.
/// Categories are sorted by ascending ground-truth positive count (ties by
/// name). Expected mode counts scores, hard mode thresholded decisions.
Chart grouped_bars_by_category(const Table& t, const VecXd& scores, const std::string& category_column,
                               const RateOptions& rates, const std::string& title);

/// PPR / TPR / FPR per protected group within the privileged, underprivileged
/// and high-effort underprivileged subgroups (privilege cutoff from top-p%,
/// effort cutoff = mean of each group).
PanelChart subgroup_panels(const Table& t, const VecXd& scores, double p, const RateOptions& rates,
                           const std::string& title);

struct EffortSeries {
  std::string label;
  VecXd scores;
};

/// Disadvantaged/advantaged PPR ratio among underprivileged rows per effort
/// bin, one line per model. `edges` are the inner bin boundaries.
Chart ppr_ratio_by_effort(const Table& t, const std::vector<EffortSeries>& models, double p,
                          const std::vector<double>& edges, const RateOptions& rates);

/// Group with the higher ground-truth PPR, then the other(s) in level order.
std::vector<std::string> groups_by_advantage(const Table& t);

}  // namespace fairsep
