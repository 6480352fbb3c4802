#pragma once

#include "fairsep/dataset.hpp"
#include "fairsep/groupstats.hpp"
#include "fairsep/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fairsep {

enum class NotionKind { EP, DP, CDP, SEP, CSEP, SEPRelaxed };

std::string to_string(NotionKind kind);
NotionKind notion_kind_from_string(const std::string& name);

enum class ZetaKind { Unit, LinearCapped };

/// Effort weighting: 1 below the effort threshold, then a linear ramp that
/// reaches `cap` at the largest effort observed in the cell.
struct EffortWeighting {
  ZetaKind kind = ZetaKind::LinearCapped;
  double cap = 2.0;
};

template <typename Scalar>
Scalar zeta(const EffortWeighting& w, Scalar effort, Scalar threshold, Scalar cell_max, bool* flat = nullptr) {
  if (w.kind == ZetaKind::Unit || effort < threshold) return Scalar(1);
  if (!(cell_max > threshold)) {
    if (flat) *flat = true;
    return Scalar(1);
  }
  using std::min;
  return Scalar(1) + min((effort - threshold) / (cell_max - threshold), Scalar(w.cap) - Scalar(1));
}

/// How the effort-weighted side of the privileged-FPR term is normalized:
/// by the weight mass of its own rows (Subset) or by the weight mass of all
/// high-effort underprivileged rows (Literal).
enum class T3Normalizer { Subset, Literal };

struct NotionConfig {
  NotionKind kind = NotionKind::SEP;
  std::string protected_column;         // defaults to the schema's protected column
  std::vector<std::string> groups;      // defaults to every level
  std::string conditional_column;       // X_a, required for CDP / CSEP
  std::string privilege_column;         // defaults to the privilege-tagged column
  double p = 5.0;
  std::optional<double> tau;            // explicit privilege cutoff, overrides p
  std::string effort_column;            // defaults to the effort-tagged column
  EffortScope effort_scope = EffortScope::PerGroup;
  EffortWeighting weighting;
  T3Normalizer t3 = T3Normalizer::Subset;
  double epsilon = 0.05;
  RateOptions rates;

  bool needs_privilege() const {
    return kind == NotionKind::SEP || kind == NotionKind::CSEP || kind == NotionKind::SEPRelaxed;
  }
  bool needs_effort() const { return kind == NotionKind::SEP || kind == NotionKind::CSEP; }
  bool conditional() const { return kind == NotionKind::CDP || kind == NotionKind::CSEP; }

  nlohmann::json to_json() const;
  static NotionConfig from_json(const nlohmann::json& doc);
};

/// Everything a notion needs that does not depend on the predictor: resolved
/// columns, thresholds, subgroup masks. Shared by the metrics and the trainer.
struct NotionContext {
  const Table* table = nullptr;
  NotionConfig config;
  std::vector<std::string> groups;
  std::vector<Mask> group_masks;
  std::vector<std::string> categories;  // a single "*" category when unconditional
  std::vector<Mask> category_masks;
  std::optional<PrivilegeThreshold> privilege;
  std::optional<EffortThresholds> effort;
  Mask privileged;  // x_p >= tau_p
  Mask high;        // x_e >= e(row)
  VecXd effort_cutoff;

  /// Effort weight per row for the cell `cell`; 1 outside high-effort rows.
  /// Sets `flat` when the cell has no spread above its threshold.
  VecXd zeta_weights(const Mask& cell, bool* flat = nullptr) const;
};

NotionContext prepare(const Table& t, const NotionConfig& config);

struct Denominators {
  std::optional<double> n;  // subgroup size used by the parity term
  std::optional<double> A, B, B0, C;
};

struct GroupTerms {
  std::optional<double> t1, t2, t3;  // nullopt when skipped
  double total = 0.0;
  Eigen::Index support = 0;
  Denominators denominators;
};

struct CategoryRecord {
  std::map<std::string, GroupTerms> groups;
  double aggregate = 0.0;
  Eigen::Index support = 0;
};

struct ViolationReport {
  NotionKind notion = NotionKind::SEP;
  double epsilon = 0.05;
  RateOptions rates;
  std::map<std::string, GroupTerms> groups;
  std::map<std::string, CategoryRecord> categories;
  double aggregate = 0.0;
  double weighted_mean = 0.0;
  bool pass = true;
  bool partial = false;
  std::vector<std::string> skipped;
  std::vector<std::string> warnings;
  std::optional<PrivilegeThreshold> privilege;
  std::optional<EffortThresholds> effort;

  nlohmann::json to_json() const;
};

ViolationReport ep_violation(const Table& t, const VecXd& scores, const NotionConfig& cfg);
ViolationReport dp_violation(const Table& t, const VecXd& scores, const NotionConfig& cfg);
ViolationReport cdp_violation(const Table& t, const VecXd& scores, const NotionConfig& cfg);
ViolationReport sep_violation(const Table& t, const VecXd& scores, const NotionConfig& cfg);
ViolationReport csep_violation(const Table& t, const VecXd& scores, const NotionConfig& cfg);
ViolationReport sep_relaxed(const Table& t, const VecXd& scores, const NotionConfig& cfg);

/// Dispatches on `cfg.kind`.
ViolationReport evaluate(const Table& t, const VecXd& scores, const NotionConfig& cfg);
ViolationReport evaluate(const NotionContext& ctx, const VecXd& scores);

}  // namespace fairsep
