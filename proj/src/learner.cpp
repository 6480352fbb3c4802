#include "fairsep/learner.hpp"
#include "fairsep/simplex.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace fairsep {

namespace {

// Largest eigenvalue of S (0.25 [X 1]^T diag(w) [X 1] + l2 I) S with
// S = diag(scale), by power iteration. Bounds the logistic-loss curvature.
double curvature_bound(const MatXd& X, const VecXd& w, double l2, const VecXd& scale) {
  const Eigen::Index d = X.cols();
  VecXd v = VecXd::Ones(d + 1) / std::sqrt(static_cast<double>(d + 1));
  double lambda = 0.0;
  for (int it = 0; it < 50; ++it) {
    const VecXd u = scale.cwiseProduct(v);
    VecXd z = X * u.head(d);
    z.array() += u[d];
    z.array() *= w.array();
    VecXd next(d + 1);
    next.head(d) = 0.25 * (X.transpose() * z) + l2 * u.head(d);
    next[d] = 0.25 * z.sum();
    next = scale.cwiseProduct(next);
    const double norm = next.norm();
    if (!(norm > 0.0)) return 0.0;
    lambda = norm;
    v = next / norm;
  }
  return lambda;
}

// min_q errors.q + bound * xi  s.t.  G q <= xi, sum(q) = 1, q >= 0, xi >= 0.
std::optional<VecXd> best_mixture_over(const VecXd& errors, const MatXd& G, double bound) {
  const Eigen::Index k = errors.size();
  const Eigen::Index m = G.rows();
  VecXd c(k + 1);
  c << errors, bound;
  MatXd A_ub(m, k + 1);
  A_ub << G, -VecXd::Ones(m);
  MatXd A_eq = MatXd::Zero(1, k + 1);
  A_eq.leftCols(k).setOnes();
  const auto lp = solve_lp<double>(c, A_ub, VecXd::Zero(m), A_eq, VecXd::Ones(1));
  if (lp.status != LpStatus::Optimal) return std::nullopt;
  VecXd q = lp.x.head(k).cwiseMax(0.0);
  const double mass = q.sum();
  if (!(mass > 0.0)) return std::nullopt;
  return VecXd(q / mass);
}

std::vector<double> to_vector(const VecXd& v) { return {v.data(), v.data() + v.size()}; }

VecXd from_vector(const std::vector<double>& v) {
  return Eigen::Map<const VecXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

// Params ---------------------------------------------------------------------------

nlohmann::json BaseParams::to_json() const {
  return {{"learning_rate", learning_rate}, {"epochs", epochs}, {"l2", l2}, {"tolerance", tolerance}, {"seed", seed}};
}

BaseParams BaseParams::from_json(const nlohmann::json& j) {
  BaseParams p;
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.epochs = j.value("epochs", p.epochs);
  p.l2 = j.value("l2", p.l2);
  p.tolerance = j.value("tolerance", p.tolerance);
  p.seed = j.value("seed", p.seed);
  if (p.epochs < 1) throw ConfigError("epochs must be positive");
  if (p.l2 < 0.0) throw ConfigError("l2 must be non-negative");
  return p;
}

nlohmann::json ReductionParams::to_json() const {
  return {{"max_iter", max_iter},       {"eta", eta},   {"bound", bound},
          {"slack", slack},             {"patience", patience},
          {"lambda_init", lambda_init}, {"class_balance", class_balance},
          {"seed", seed},               {"base", base.to_json()}};
}

ReductionParams ReductionParams::from_json(const nlohmann::json& j) {
  ReductionParams p;
  p.max_iter = j.value("max_iter", p.max_iter);
  p.eta = j.value("eta", p.eta);
  p.bound = j.value("bound", p.bound);
  p.slack = j.value("slack", p.slack);
  p.patience = j.value("patience", p.patience);
  p.lambda_init = j.value("lambda_init", p.lambda_init);
  p.class_balance = j.value("class_balance", p.class_balance);
  p.seed = j.value("seed", p.seed);
  if (j.contains("base")) p.base = BaseParams::from_json(j["base"]);
  p.base.seed = p.seed;
  if (p.max_iter < 1) throw ConfigError("max_iter must be positive");
  if (!(p.eta > 0.0) || !(p.bound > 0.0)) throw ConfigError("eta and bound must be positive");
  if (p.slack < 0.0) throw ConfigError("slack must be non-negative");
  if (!(p.lambda_init > 0.0)) throw ConfigError("lambda_init must be positive");
  return p;
}

// Base learner -----------------------------------------------------------------------

VecXd LogisticModel::predict_proba(const MatXd& X) const {
  if (X.cols() != weights.size())
    throw EncodingError(fmt::format("feature width {} does not match model width {}", X.cols(), weights.size()));
  VecXd z = X * weights;
  return z.unaryExpr([this](double v) { return sigmoid(v + intercept); });
}

VecXd LogisticModel::decide(const MatXd& X, double cutoff) const {
  return (predict_proba(X).array() >= cutoff).cast<double>().matrix();
}

LogisticModel fit_base(const MatXd& X, const VecXd& labels, const std::optional<VecXd>& costs,
                       const BaseParams& params) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (!X.allFinite()) throw Error("features contain non-finite values");
  VecXd target(n);
  VecXd w(n);
  if (costs) {
    if (costs->size() != n) throw AlignmentError("cost vector length does not match rows");
    target = (costs->array() < 0.0).cast<double>().matrix();
    w = costs->cwiseAbs();
  } else {
    if (labels.size() != n) throw AlignmentError("label vector length does not match rows");
    for (Eigen::Index i = 0; i < n; ++i)
      if (labels[i] != 0.0 && labels[i] != 1.0) throw Error("labels must be 0/1");
    target = labels;
    w = VecXd::Ones(n);
  }

  LogisticModel model;
  model.weights = VecXd::Zero(d);
  const double total = w.sum();
  if (!(total > 0.0)) {
    model.converged = true;
    return model;
  }
  w /= total;

  // Jacobi preconditioner from the curvature bound's diagonal.
  VecXd precond(d + 1);
  precond.head(d) = (0.25 * (X.array().square().matrix().transpose() * w)).array() + params.l2;
  precond[d] = 0.25;
  precond = precond.unaryExpr([](double v) { return v > 1e-12 ? 1.0 / v : 1.0; });
  double step = params.learning_rate;
  if (!(step > 0.0)) {
    const double L = 1.05 * curvature_bound(X, w, params.l2, precond.cwiseSqrt());
    step = L > 0.0 ? 1.0 / L : 1.0;
  }

  // theta = [weights; intercept]
  VecXd theta = VecXd::Zero(d + 1);
  VecXd previous = theta;
  VecXd best = theta;
  double best_loss = std::numeric_limits<double>::infinity();
  VecXd grad(d + 1);
  int k = 1;  // momentum counter, reset on restart
  for (int epoch = 1; epoch <= params.epochs; ++epoch, ++k) {
    const double momentum = static_cast<double>(k - 1) / static_cast<double>(k + 2);
    const VecXd look = theta + momentum * (theta - previous);

    VecXd z = X * look.head(d);
    z.array() += look[d];
    VecXd residual(n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // One exp serves both the sigmoid and the softplus.
      const double e = std::exp(-std::abs(z[i]));
      const double p = z[i] >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
      residual[i] = w[i] * (p - target[i]);
      loss += w[i] * (std::max(z[i], 0.0) + std::log1p(e) - target[i] * z[i]);
    }
    loss += 0.5 * params.l2 * look.head(d).squaredNorm();
    grad.head(d) = X.transpose() * residual + params.l2 * look.head(d);
    grad[d] = residual.sum();

    if (loss < best_loss) {
      best_loss = loss;
      best = look;
    }
    model.epochs_run = epoch;
    if (grad.lpNorm<Eigen::Infinity>() < params.tolerance) {
      best = look;
      best_loss = loss;
      model.converged = true;
      break;
    }
    previous = theta;
    theta = look - step * precond.cwiseProduct(grad);
    // Gradient restart: drop the momentum once it points uphill.
    if (grad.dot(theta - previous) > 0.0) k = 0;
  }
  model.weights = best.head(d);
  model.intercept = best[d];
  model.loss = best_loss;
  return model;
}

// Constraints ------------------------------------------------------------------------

CompiledConstraints compile_constraints(const Table& t, const NotionConfig& cfg, double slack) {
  return compile_constraints(prepare(t, cfg), slack);
}

CompiledConstraints compile_constraints(const NotionContext& ctx, double slack) {
  if (slack < 0.0) throw ConfigError("constraint slack must be non-negative");
  const auto& t = *ctx.table;
  const auto& cfg = ctx.config;
  const auto n = static_cast<Eigen::Index>(t.rows());
  const VecXd& y = t.labels();
  CompiledConstraints out;

  auto cell_name = [&](std::size_t a, std::size_t s) {
    if (cfg.conditional()) return fmt::format("{}[{}|{}]", to_string(cfg.kind), ctx.categories[a], ctx.groups[s]);
    return fmt::format("{}[{}]", to_string(cfg.kind), ctx.groups[s]);
  };
  auto indicator_mean = [&](const Mask& rows) {
    VecXd w = VecXd::Zero(n);
    const double k = static_cast<double>(count(rows));
    for (Eigen::Index i = 0; i < n; ++i)
      if (rows[i]) w[i] = 1.0 / k;
    return w;
  };
  auto weighted_mean = [&](const Mask& rows, const VecXd& zeta) {
    VecXd w = VecXd::Zero(n);
    const double k = static_cast<double>(count(rows));
    for (Eigen::Index i = 0; i < n; ++i)
      if (rows[i]) w[i] = zeta[i] / k;
    return w;
  };
  auto push = [&](std::string name, VecXd w) {
    MomentConstraint c;
    c.name = std::move(name);
    c.rows = (w.array() != 0.0).count();
    c.weights = std::move(w);
    c.slack = slack;
    out.constraints.push_back(std::move(c));
  };
  auto push_pair = [&](const std::string& name, const VecXd& diff) {
    push(name + ".parity+", diff);
    push(name + ".parity-", -diff);
  };

  const bool sep_like = cfg.needs_privilege();
  const Mask base = cfg.kind == NotionKind::EP ? Mask(y.array() > 0.5) : all_rows(n);
  const Mask negatives = y.array() < 0.5;

  for (std::size_t a = 0; a < ctx.categories.size(); ++a) {
    const Mask universe = ctx.category_masks[a] && base;
    for (std::size_t s = 0; s < ctx.groups.size(); ++s) {
      const std::string name = cell_name(a, s);
      const Mask cell = universe && ctx.group_masks[s];
      const Mask compared = sep_like ? Mask(cell && !ctx.privileged) : cell;
      if (count(universe) == 0 || count(compared) == 0) {
        out.dropped.push_back(name + ".parity (empty cell)");
      } else {
        push_pair(name, indicator_mean(universe) - indicator_mean(compared));
      }
      if (!cfg.needs_effort()) continue;

      const VecXd zeta = ctx.zeta_weights(cell);
      const Mask low = compared && !ctx.high;
      const Mask high = compared && ctx.high;
      if (count(low) == 0 || count(high) == 0) {
        out.dropped.push_back(name + ".effort (empty cell)");
      } else {
        // E[h | low] - E[zeta h | high] <= slack
        push(name + ".effort", indicator_mean(low) - weighted_mean(high, zeta));
      }
      const Mask priv_neg = universe && ctx.privileged && negatives;
      const Mask high_neg = high && negatives;
      if (count(priv_neg) == 0 || count(high_neg) == 0) {
        out.dropped.push_back(name + ".privileged_fpr (empty cell)");
      } else {
        // E[h | privileged, y=0] - E[zeta h | high, y=0] <= slack
        push(name + ".privileged_fpr", indicator_mean(priv_neg) - weighted_mean(high_neg, zeta));
      }
    }
  }
  return out;
}

// Reduction ----------------------------------------------------------------------------

ReducedModel exponentiated_gradient(const MatXd& X, const VecXd& labels,
                                    const std::vector<MomentConstraint>& constraints,
                                    const ReductionParams& params) {
  const Eigen::Index n = X.rows();
  if (labels.size() != n) throw AlignmentError("label vector length does not match rows");
  ReducedModel model;
  model.params = params;
  BaseParams base = params.base;
  base.seed = params.seed;
  model.params.base = base;
  for (const auto& c : constraints) {
    if (c.weights.size() != n) throw AlignmentError("constraint '" + c.name + "' does not match rows");
    model.constraint_names.push_back(c.name);
    model.constraint_slack.push_back(c.slack);
  }

  // Per-row weight of a mistake: 1/n, or 1/(2 n_y) when both classes count equally.
  VecXd row_weight = VecXd::Constant(n, 1.0 / static_cast<double>(n));
  if (params.class_balance) {
    const double positives = labels.sum();
    const double negatives = static_cast<double>(n) - positives;
    if (positives == 0.0 || negatives == 0.0) throw DegenerateError("class balancing needs both labels present");
    for (Eigen::Index i = 0; i < n; ++i) row_weight[i] = 0.5 / (labels[i] > 0.5 ? positives : negatives);
  }
  const VecXd error_cost = (VecXd::Ones(n) - 2.0 * labels).cwiseProduct(row_weight);
  auto error_of = [&](const VecXd& h) { return (h - labels).cwiseAbs().dot(row_weight); };

  if (constraints.empty()) {
    const std::optional<VecXd> costs = params.class_balance ? std::optional<VecXd>(error_cost) : std::nullopt;
    model.members.push_back(fit_base(X, labels, costs, base));
    model.mixture = {1.0};
    const VecXd h = model.members.back().decide(X);
    IterationRecord rec;
    rec.iteration = 1;
    rec.member_error = rec.mixture_error = rec.objective = error_of(h);
    model.trajectory.push_back(rec);
    model.best_iteration = 1;
    model.final_error = rec.mixture_error;
    if (!model.members.back().converged) model.warnings.push_back("base learner did not converge");
    return model;
  }

  const auto m = static_cast<Eigen::Index>(constraints.size());
  MatXd W(m, n);
  VecXd offset(m);
  VecXd slack(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    W.row(j) = constraints[static_cast<std::size_t>(j)].weights.transpose();
    offset[j] = constraints[static_cast<std::size_t>(j)].offset;
    slack[j] = constraints[static_cast<std::size_t>(j)].slack;
  }
  // Start with almost all multiplier mass on the free coordinate, so early
  // best responses stay close to the unconstrained fit.
  const double lambda0 = std::min(params.lambda_init, 0.5 * params.bound / static_cast<double>(m));
  VecXd theta = VecXd::Constant(m, std::log(lambda0 / (params.bound - static_cast<double>(m) * lambda0)));
  MatXd G(m, 0);  // member moments minus slack, one column per member
  VecXd errors(0);
  double best_objective = std::numeric_limits<double>::infinity();
  std::vector<LogisticModel> members;
  VecXd best_mixture;
  int unconverged = 0;

  for (int t = 1; t <= params.max_iter; ++t) {
    const double shift = std::max(0.0, theta.maxCoeff());
    const VecXd expo = (theta.array() - shift).exp().matrix();
    const VecXd lambda = params.bound * expo / (std::exp(-shift) + expo.sum());

    const VecXd costs = error_cost + W.transpose() * lambda;
    members.push_back(fit_base(X, labels, costs, base));
    if (!members.back().converged) ++unconverged;
    const VecXd h = members.back().decide(X);
    const VecXd gamma = W * h + offset;
    const double err = error_of(h);

    G.conservativeResize(m, t);
    G.col(t - 1) = gamma - slack;
    errors.conservativeResize(t);
    errors[t - 1] = err;

    // Candidate mixtures: the uniform average of the iterates, and the
    // error-minimizing mixture over their convex hull.
    VecXd q = VecXd::Constant(t, 1.0 / t);
    double mixture_error = errors.dot(q);
    double mixture_violation = (G * q).maxCoeff();
    double objective = mixture_error + params.bound * std::max(0.0, mixture_violation);
    if (auto hull = best_mixture_over(errors, G, params.bound)) {
      const double hull_error = errors.dot(*hull);
      const double hull_violation = (G * *hull).maxCoeff();
      const double hull_objective = hull_error + params.bound * std::max(0.0, hull_violation);
      if (hull_objective < objective) {
        q = *hull;
        mixture_error = hull_error;
        mixture_violation = hull_violation;
        objective = hull_objective;
      }
    }

    IterationRecord rec;
    rec.iteration = t;
    rec.member_error = err;
    rec.member_max_violation = (gamma - slack).maxCoeff();
    rec.mixture_error = mixture_error;
    rec.mixture_max_violation = mixture_violation;
    rec.objective = objective;
    rec.lambda = lambda;
    model.trajectory.push_back(rec);

    if (objective < best_objective - 1e-12) {
      best_objective = objective;
      best_mixture = q;
      model.best_iteration = t;
      model.final_max_violation = mixture_violation;
      model.final_error = mixture_error;
    }
    if (t - model.best_iteration >= params.patience) {
      model.early_stopped = true;
      model.warnings.push_back(
          fmt::format("stopped at iteration {}: no better iterate in {} iterations", t, params.patience));
      break;
    }
    theta += params.eta * (gamma - slack);
  }

  // Keep the members the best mixture actually uses.
  for (Eigen::Index k = 0; k < best_mixture.size(); ++k) {
    if (best_mixture[k] <= 0.0) continue;
    model.members.push_back(members[static_cast<std::size_t>(k)]);
    model.mixture.push_back(best_mixture[k]);
  }
  const double mass = std::accumulate(model.mixture.begin(), model.mixture.end(), 0.0);
  for (auto& w : model.mixture) w /= mass;
  if (unconverged) model.warnings.push_back(fmt::format("{} best responses did not converge", unconverged));
  // LP round-off leaves violations of order 1e-12 on feasible mixtures
  if (model.final_max_violation > 1e-9)
    model.warnings.push_back(
        fmt::format("training constraints not met: max violation {:.4f} above slack", model.final_max_violation));
  return model;
}

ReducedModel train_fair(const Table& train, const std::optional<NotionConfig>& notion, const ReductionParams& params,
                        EncoderOptions encoding) {
  Encoder encoder = Encoder::fit(train, encoding);
  const MatXd X = encoder.transform(train);
  std::vector<MomentConstraint> constraints;
  std::vector<std::string> dropped;
  std::optional<NotionConfig> resolved;
  if (notion) {
    const auto ctx = prepare(train, *notion);
    auto compiled = compile_constraints(ctx, params.slack);
    constraints = std::move(compiled.constraints);
    dropped = std::move(compiled.dropped);
    resolved = ctx.config;
  }
  ReducedModel model = exponentiated_gradient(X, train.labels(), constraints, params);
  model.encoder = std::move(encoder);
  model.notion = resolved;
  model.dropped_constraints = std::move(dropped);
  for (const auto& w : model.encoder.warnings()) model.warnings.push_back(w);
  if (notion && constraints.empty()) model.warnings.push_back("every constraint was dropped; model is unconstrained");
  return model;
}

MatXd member_decisions(const ReducedModel& model, const MatXd& X) {
  if (X.cols() != model.encoder.width() && !model.members.empty() && X.cols() != model.members.front().weights.size())
    throw EncodingError("feature width does not match the model encoding");
  MatXd D(X.rows(), static_cast<Eigen::Index>(model.members.size()));
  for (std::size_t k = 0; k < model.members.size(); ++k)
    D.col(static_cast<Eigen::Index>(k)) = model.members[k].decide(X);
  return D;
}

VecXd predict(const ReducedModel& model, const MatXd& X, PredictMode mode, double cutoff) {
  if (model.members.empty()) throw Error("model has no members");
  if (mode == PredictMode::Hard && !(cutoff > 0.0 && cutoff < 1.0)) throw ConfigError("cutoff must lie in (0,1)");
  const MatXd D = member_decisions(model, X);
  VecXd score = VecXd::Zero(X.rows());
  for (std::size_t k = 0; k < model.members.size(); ++k) score += model.mixture[k] * D.col(static_cast<Eigen::Index>(k));
  score = score.cwiseMax(0.0).cwiseMin(1.0);
  if (mode == PredictMode::Score) return score;
  return (score.array() >= cutoff).cast<double>().matrix();
}

VecXd predict(const ReducedModel& model, const Table& t, PredictMode mode, double cutoff) {
  return predict(model, model.encoder.transform(t), mode, cutoff);
}

// Serialization -----------------------------------------------------------------------

nlohmann::json ReducedModel::to_json() const {
  nlohmann::json members_json = nlohmann::json::array();
  for (const auto& mdl : members)
    members_json.push_back({{"weights", to_vector(mdl.weights)},
                            {"intercept", mdl.intercept},
                            {"loss", mdl.loss},
                            {"epochs_run", mdl.epochs_run},
                            {"converged", mdl.converged}});
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& r : trajectory)
    traj.push_back({{"iteration", r.iteration},
                    {"member_error", r.member_error},
                    {"member_max_violation", r.member_max_violation},
                    {"mixture_error", r.mixture_error},
                    {"mixture_max_violation", r.mixture_max_violation},
                    {"objective", r.objective},
                    {"lambda", to_vector(r.lambda)}});
  nlohmann::json cons = nlohmann::json::array();
  for (std::size_t j = 0; j < constraint_names.size(); ++j)
    cons.push_back({{"name", constraint_names[j]}, {"slack", constraint_slack[j]}});
  return {{"format", "fairsep-reduced-model/1"},
          {"encoder", encoder.to_json()},
          {"members", members_json},
          {"mixture", mixture},
          {"constraints", cons},
          {"dropped_constraints", dropped_constraints},
          {"notion", notion ? notion->to_json() : nlohmann::json()},
          {"params", params.to_json()},
          {"trajectory", traj},
          {"best_iteration", best_iteration},
          {"final_max_violation", final_max_violation},
          {"final_error", final_error},
          {"early_stopped", early_stopped},
          {"warnings", warnings}};
}

ReducedModel ReducedModel::from_json(const nlohmann::json& j) {
  ReducedModel m;
  try {
    m.encoder = Encoder::from_json(j.at("encoder"));
    for (const auto& mj : j.at("members")) {
      LogisticModel lm;
      lm.weights = from_vector(mj.at("weights").get<std::vector<double>>());
      lm.intercept = mj.at("intercept").get<double>();
      lm.loss = mj.value("loss", 0.0);
      lm.epochs_run = mj.value("epochs_run", 0);
      lm.converged = mj.value("converged", false);
      m.members.push_back(std::move(lm));
    }
    m.mixture = j.at("mixture").get<std::vector<double>>();
    for (const auto& c : j.value("constraints", nlohmann::json::array())) {
      m.constraint_names.push_back(c.at("name").get<std::string>());
      m.constraint_slack.push_back(c.at("slack").get<double>());
    }
    m.dropped_constraints = j.value("dropped_constraints", std::vector<std::string>{});
    if (j.contains("notion") && !j["notion"].is_null()) m.notion = NotionConfig::from_json(j["notion"]);
    if (j.contains("params")) m.params = ReductionParams::from_json(j["params"]);
    for (const auto& r : j.value("trajectory", nlohmann::json::array())) {
      IterationRecord rec;
      rec.iteration = r.at("iteration").get<int>();
      rec.member_error = r.at("member_error").get<double>();
      rec.member_max_violation = r.at("member_max_violation").get<double>();
      rec.mixture_error = r.at("mixture_error").get<double>();
      rec.mixture_max_violation = r.at("mixture_max_violation").get<double>();
      rec.objective = r.at("objective").get<double>();
      rec.lambda = from_vector(r.at("lambda").get<std::vector<double>>());
      m.trajectory.push_back(std::move(rec));
    }
    m.best_iteration = j.value("best_iteration", 0);
    m.final_max_violation = j.value("final_max_violation", 0.0);
    m.final_error = j.value("final_error", 0.0);
    m.early_stopped = j.value("early_stopped", false);
    m.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model JSON: ") + e.what());
  }
  if (m.members.size() != m.mixture.size()) throw ConfigError("model member and mixture counts differ");
  for (const auto& mem : m.members)
    if (mem.weights.size() != m.encoder.width()) throw ConfigError("member width does not match encoder");
  return m;
}

// Splits ---------------------------------------------------------------------------------

Split stratified_split(const std::vector<int>& strata, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in [0, 1)");
  std::map<int, std::vector<Eigen::Index>> buckets;
  for (std::size_t i = 0; i < strata.size(); ++i) buckets[strata[i]].push_back(static_cast<Eigen::Index>(i));
  std::mt19937_64 rng(seed);
  Split split;
  for (auto& [key, rows] : buckets) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto k = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
    split.test.insert(split.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k));
    split.train.insert(split.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(k), rows.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Split stratified_split(const Table& t, double test_fraction, std::uint64_t seed) {
  const auto& group = t.protected_column();
  const auto& y = t.labels();
  std::vector<int> strata(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i)
    strata[i] = group.codes[i] * 2 + (y[static_cast<Eigen::Index>(i)] > 0.5 ? 1 : 0);
  return stratified_split(strata, test_fraction, seed);
}

}  // namespace fairsep
