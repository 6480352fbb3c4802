#pragma once

#include "fairsep/dataset.hpp"
#include "fairsep/notions.hpp"
#include "fairsep/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fairsep {

// Base learner ---------------------------------------------------------------------

struct BaseParams {
  double learning_rate = 0.0;  // <= 0 picks 1/L from a power-iteration bound
  int epochs = 500;
  double l2 = 1e-4;
  double tolerance = 1e-4;  // on the max-norm of the (weight-normalized) gradient
  std::uint64_t seed = 42;

  nlohmann::json to_json() const;
  static BaseParams from_json(const nlohmann::json& doc);
};

/// L2-regularized logistic regression over encoded features.
struct LogisticModel {
  VecXd weights;
  double intercept = 0.0;
  double loss = 0.0;
  int epochs_run = 0;
  bool converged = false;

  VecXd predict_proba(const MatXd& X) const;
  /// 1 where predict_proba >= cutoff, else 0.
  VecXd decide(const MatXd& X, double cutoff = 0.5) const;
};

/// Fits by accelerated full-batch gradient descent. With `costs` (signed cost
/// of predicting 1 minus cost of predicting 0) each row is relabelled to the
/// cheaper class and weighted by |cost|; `labels` are then ignored. Returns
/// the best iterate with `converged == false` if the gradient tolerance was
/// not reached.
LogisticModel fit_base(const MatXd& X, const VecXd& labels, const std::optional<VecXd>& costs,
                       const BaseParams& params);

// Moment constraints -----------------------------------------------------------------

/// g(h) = weights . h + offset <= slack, linear in the per-row predictions h.
struct MomentConstraint {
  std::string name;
  VecXd weights;
  double offset = 0.0;
  double slack = 0.0;
  Eigen::Index rows = 0;  // rows with non-zero weight

  double value(const VecXd& h) const { return weights.dot(h) + offset; }
  double violation(const VecXd& h) const { return value(h) - slack; }
};

struct CompiledConstraints {
  std::vector<MomentConstraint> constraints;
  std::vector<std::string> dropped;  // empty conditioning cells
};

CompiledConstraints compile_constraints(const NotionContext& ctx, double slack);
CompiledConstraints compile_constraints(const Table& t, const NotionConfig& cfg, double slack);

// Reduction ------------------------------------------------------------------------------

struct ReductionParams {
  int max_iter = 50;
  double eta = 2.0;
  double bound = 100.0;  // multiplier mass B
  double slack = 0.02;   // training epsilon
  int patience = 25;     // iterations without a better iterate before stopping
  double lambda_init = 0.01;  // starting multiplier per constraint
  bool class_balance = false;  // weigh errors so each class contributes half
  std::uint64_t seed = 42;
  BaseParams base;

  nlohmann::json to_json() const;
  static ReductionParams from_json(const nlohmann::json& doc);
};

struct IterationRecord {
  int iteration = 0;
  double member_error = 0.0;
  double member_max_violation = 0.0;
  double mixture_error = 0.0;
  double mixture_max_violation = 0.0;
  double objective = 0.0;
  VecXd lambda;
};

/// Randomized classifier: a convex mixture of base models. Each member votes
/// with its hard decision at 0.5; the mixture score is the weighted vote,
/// i.e. the probability that the randomized classifier predicts 1.
struct ReducedModel {
  Encoder encoder;
  std::vector<LogisticModel> members;
  std::vector<double> mixture;
  std::vector<IterationRecord> trajectory;
  std::vector<std::string> constraint_names;
  std::vector<double> constraint_slack;
  std::vector<std::string> dropped_constraints;
  std::optional<NotionConfig> notion;
  ReductionParams params;
  int best_iteration = 0;
  double final_max_violation = 0.0;
  double final_error = 0.0;
  bool early_stopped = false;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static ReducedModel from_json(const nlohmann::json& doc);
};

/// Runs the multiplier / best-response game over `constraints` on encoded
/// features. With no constraints this is a single `fit_base` call.
ReducedModel exponentiated_gradient(const MatXd& X, const VecXd& labels,
                                    const std::vector<MomentConstraint>& constraints,
                                    const ReductionParams& params);

/// Encodes `train`, compiles the notion (none: unconstrained) and runs the
/// reduction.
ReducedModel train_fair(const Table& train, const std::optional<NotionConfig>& notion,
                        const ReductionParams& params, EncoderOptions encoding = {});

enum class PredictMode { Score, Hard };

/// Mixture score per row in [0,1]; hard mode thresholds it at `cutoff`.
VecXd predict(const ReducedModel& model, const MatXd& X, PredictMode mode = PredictMode::Score,
              double cutoff = 0.5);
VecXd predict(const ReducedModel& model, const Table& t, PredictMode mode = PredictMode::Score,
              double cutoff = 0.5);

/// Per-member hard decisions, one column per member.
MatXd member_decisions(const ReducedModel& model, const MatXd& X);

// Splits -------------------------------------------------------------------------------

struct Split {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

/// Stratified shuffle split: within every stratum key round(test_fraction * n)
/// rows go to test. Both index lists are returned in ascending row order.
Split stratified_split(const std::vector<int>& strata, double test_fraction, std::uint64_t seed);

/// Strata = (protected group, label).
Split stratified_split(const Table& t, double test_fraction, std::uint64_t seed);

}  // namespace fairsep
