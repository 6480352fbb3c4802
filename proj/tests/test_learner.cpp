#include "doctest.h"

#include "fairsep/learner.hpp"
#include "fairsep/simplex.hpp"
#include "support.hpp"

#include <nlohmann/json.hpp>

#include <random>
#include <set>

using namespace fairsep;

namespace {

using Lp = LpResult<double>;

Lp lp(const VecXd& c, const MatXd& A, const VecXd& b, const MatXd& Aeq = MatXd(0, 0), const VecXd& beq = VecXd(0)) {
  const MatXd eq = Aeq.size() ? Aeq : MatXd(0, c.size());
  return solve_lp<double>(c, A, b, eq, beq);
}

// Logistic data with a known separating direction and some label noise.
void logistic_data(std::mt19937_64& rng, Eigen::Index n, MatXd& X, VecXd& y) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  X.resize(n, 3);
  y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) X(i, j) = z(rng);
    const double logit = 2.0 * X(i, 0) - 1.5 * X(i, 1) + 0.25;
    y[i] = u(rng) < 1.0 / (1.0 + std::exp(-logit)) ? 1.0 : 0.0;
  }
}

// Group F mostly negative, group M mostly positive; xp reveals the label, so an
// unconstrained model inherits the base-rate gap.
Table planted_dp(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<oracle::Row> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    r.s = i % 2 ? "M" : "F";
    r.a = u(rng) < 0.5 ? "A" : "B";
    r.y = u(rng) < (r.s == "M" ? 0.75 : 0.2) ? 1 : 0;
    r.xp = std::round(100.0 * ((r.y ? 0.7 : 0.3) + 0.25 * (u(rng) - 0.5)));
    r.xe = std::round(40.0 + 20.0 * (u(rng) - 0.5));
  }
  return testing::to_table(rows);
}

double dp_gap(const Table& t, const VecXd& scores) {
  NotionConfig cfg;
  cfg.kind = NotionKind::DP;
  cfg.rates.mode = RateMode::Expected;
  return evaluate(t, scores, cfg).aggregate;
}

}  // namespace

TEST_SUITE("simplex") {
  TEST_CASE("textbook optimum") {
    MatXd A(2, 2);
    A << 1, 2, 3, 1;
    const auto r = lp(Eigen::Vector2d(-1, -1), A, Eigen::Vector2d(4, 6));
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(1.6));
    CHECK(r.x[1] == doctest::Approx(1.2));
    CHECK(r.objective == doctest::Approx(-2.8));
  }

  TEST_CASE("negative right-hand sides and equalities") {
    MatXd A(1, 2);
    A << -1, 0;  // x >= 2
    MatXd Aeq(1, 2);
    Aeq << 1, 1;  // x + y = 5
    const auto r = lp(Eigen::Vector2d(1, 2), A, Eigen::Matrix<double, 1, 1>(-2), Aeq, Eigen::Matrix<double, 1, 1>(5));
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(5));
    CHECK(r.objective == doctest::Approx(5));
  }

  TEST_CASE("infeasible and unbounded programs") {
    MatXd A(1, 1);
    A << 1;
    CHECK(lp(VecXd::Ones(1), A, Eigen::Matrix<double, 1, 1>(-1)).status == LpStatus::Infeasible);
    MatXd B(1, 1);
    B << -1;
    CHECK(lp(-VecXd::Ones(1), B, Eigen::Matrix<double, 1, 1>(1)).status == LpStatus::Unbounded);
  }

  TEST_CASE("degenerate program terminates") {
    MatXd A(3, 2);
    A << 1, 1, 1, 0, 0, 1;
    const auto r = lp(Eigen::Vector2d(-1, -1), A, Eigen::Vector3d(1, 1, 1));
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.objective == doctest::Approx(-1));
  }

  TEST_CASE("random programs satisfy their constraints") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      MatXd A = MatXd::NullaryExpr(4, 3, [&] { return u(rng); });
      VecXd b = VecXd::NullaryExpr(4, [&] { return 0.5 + u(rng); });
      VecXd c = VecXd::NullaryExpr(3, [&] { return -u(rng); });
      const auto r = lp(c, A, b);
      REQUIRE(r.status == LpStatus::Optimal);
      CHECK(((A * r.x - b).array() <= 1e-9).all());
      CHECK((r.x.array() >= -1e-12).all());
      // no vertex of the unit-scaled box does better
      for (int k = 0; k < 3; ++k) {
        VecXd e = VecXd::Zero(3);
        e[k] = (b.array() / A.col(k).array()).minCoeff();
        CHECK(c.dot(e) >= r.objective - 1e-9);
      }
    }
  }
}

TEST_SUITE("learner") {
  TEST_CASE("base fit reaches a stationary point") {
    std::mt19937_64 rng(1);
    MatXd X;
    VecXd y;
    logistic_data(rng, 2000, X, y);
    BaseParams p;
    p.tolerance = 1e-6;
    p.epochs = 5000;
    const auto m = fit_base(X, y, std::nullopt, p);
    CHECK(m.converged);
    // gradient of mean log-loss + l2/2 |w|^2, recomputed here
    const VecXd prob = m.predict_proba(X);
    const VecXd r = prob - y;
    const VecXd grad = X.transpose() * r / 2000.0 + p.l2 * m.weights;
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-5);
    CHECK(std::abs(r.mean()) < 1e-5);
    CHECK(m.weights[0] > 1.0);
    CHECK(m.weights[1] < -1.0);
    const double acc = 1.0 - (m.decide(X) - y).cwiseAbs().mean();
    CHECK(acc > 0.75);
  }

  TEST_CASE("cost-sensitive fit with error costs matches the label fit") {
    std::mt19937_64 rng(2);
    MatXd X;
    VecXd y;
    logistic_data(rng, 500, X, y);
    BaseParams p;
    const VecXd costs = (VecXd::Ones(500) - 2.0 * y) / 500.0;
    const auto a = fit_base(X, y, std::nullopt, p);
    const auto b = fit_base(X, VecXd::Zero(500), costs, p);
    CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(a.decide(X) == b.decide(X));
  }

  TEST_CASE("zero-cost rows are ignored") {
    std::mt19937_64 rng(3);
    MatXd X;
    VecXd y;
    logistic_data(rng, 400, X, y);
    VecXd costs = (VecXd::Ones(400) - 2.0 * y);
    costs.tail(200).setZero();
    const auto half = fit_base(X.topRows(200), y.head(200), std::nullopt, BaseParams{});
    const auto masked = fit_base(X, y, costs, BaseParams{});
    CHECK((half.weights - masked.weights).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("no constraints is exactly the base fit") {
    std::mt19937_64 rng(4);
    MatXd X;
    VecXd y;
    logistic_data(rng, 300, X, y);
    ReductionParams params;
    const auto model = exponentiated_gradient(X, y, {}, params);
    BaseParams base = params.base;
    base.seed = params.seed;
    const auto direct = fit_base(X, y, std::nullopt, base);
    REQUIRE(model.members.size() == 1);
    CHECK(model.members[0].weights == direct.weights);
    CHECK(model.members[0].intercept == direct.intercept);
    CHECK(predict(model, X, PredictMode::Score) == direct.decide(X));
  }

  TEST_CASE("TOY8 SEP constraints have the hand-built weights") {
    const Table t = testing::toy8();
    NotionConfig cfg;
    cfg.kind = NotionKind::SEP;
    cfg.p = 50.0;
    cfg.weighting.kind = ZetaKind::Unit;
    const auto compiled = compile_constraints(t, cfg, 0.02);
    REQUIRE(compiled.constraints.size() == 8);
    CHECK(compiled.dropped.empty());
    auto find = [&](const std::string& name) -> const MomentConstraint& {
      for (const auto& c : compiled.constraints)
        if (c.name == name) return c;
      FAIL("missing constraint " << name);
      return compiled.constraints.front();
    };
    VecXd parity_f(8), effort_f(8), fpr_f(8), parity_m(8), effort_m(8), fpr_m(8);
    const double o = 1.0 / 8.0, in = 1.0 / 8.0 - 0.5;
    parity_f << in, in, o, o, o, o, o, o;
    parity_m << o, o, o, o, in, in, o, o;
    effort_f << 1, -1, 0, 0, 0, 0, 0, 0;
    effort_m << 0, 0, 0, 0, 1, -1, 0, 0;
    fpr_f << 0, -1, 0, 1, 0, 0, 0, 0;
    fpr_m << 0, 0, 0, 1, 0, -1, 0, 0;
    CHECK(find("SEP[F].parity+").weights == parity_f);
    CHECK(find("SEP[F].parity-").weights == -parity_f);
    CHECK(find("SEP[M].parity+").weights == parity_m);
    CHECK(find("SEP[F].effort").weights == effort_f);
    CHECK(find("SEP[M].effort").weights == effort_m);
    CHECK(find("SEP[F].privileged_fpr").weights == fpr_f);
    CHECK(find("SEP[M].privileged_fpr").weights == fpr_m);
    CHECK(find("SEP[F].effort").slack == 0.02);
  }

  TEST_CASE("empty cells are dropped and named") {
    const Table t = testing::toy8();
    NotionConfig cfg;
    cfg.kind = NotionKind::CSEP;
    cfg.p = 50.0;
    cfg.conditional_column = "occ";
    const auto compiled = compile_constraints(t, cfg, 0.0);
    CHECK_FALSE(compiled.dropped.empty());
    for (const auto& d : compiled.dropped) CHECK(d.find("empty cell") != std::string::npos);
    CHECK_THROWS_AS(compile_constraints(t, cfg, -0.1), ConfigError);
  }

  TEST_CASE("planted DP violation is removed on the training set") {
    const Table t = planted_dp(9, 600);
    ReductionParams params;
    const auto free_model = train_fair(t, std::nullopt, params);
    CHECK(dp_gap(t, predict(free_model, t)) >= 0.2);

    NotionConfig dp;
    dp.kind = NotionKind::DP;
    const auto fair = train_fair(t, dp, params);
    CHECK(dp_gap(t, predict(fair, t)) <= params.slack + 0.02);
    CHECK(fair.final_max_violation <= 1e-9);
  }

  TEST_CASE("mixture predictions are convex combinations of the members") {
    const Table t = planted_dp(10, 400);
    NotionConfig dp;
    dp.kind = NotionKind::DP;
    const auto model = train_fair(t, dp, ReductionParams{});
    const MatXd X = model.encoder.transform(t);
    const MatXd D = member_decisions(model, X);
    const VecXd q = Eigen::Map<const VecXd>(model.mixture.data(), static_cast<Eigen::Index>(model.mixture.size()));
    const VecXd score = predict(model, X);
    CHECK(std::abs(q.sum() - 1.0) < 1e-12);
    CHECK((q.array() > 0.0).all());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      CHECK(score[i] >= D.row(i).minCoeff() - 1e-12);
      CHECK(score[i] <= D.row(i).maxCoeff() + 1e-12);
    }
    CHECK(((score - D * q).array().abs() < 1e-12).all());

    // constraints are linear in the scores
    const auto compiled = compile_constraints(t, dp, 0.02);
    for (const auto& c : compiled.constraints) {
      double mixed = 0.0;
      for (Eigen::Index k = 0; k < D.cols(); ++k) mixed += q[k] * c.value(D.col(k));
      CHECK(c.value(score) == doctest::Approx(mixed).epsilon(1e-12));
    }

    const VecXd hard = predict(model, X, PredictMode::Hard, 0.5);
    CHECK(((hard.array() == 0.0) || (hard.array() == 1.0)).all());
    CHECK_THROWS_AS(predict(model, X, PredictMode::Hard, 1.0), ConfigError);
  }

  TEST_CASE("training is deterministic and the model round-trips") {
    const Table t = planted_dp(11, 300);
    NotionConfig sep;
    sep.kind = NotionKind::SEP;
    sep.p = 20.0;
    ReductionParams params;
    params.max_iter = 10;
    const auto a = train_fair(t, sep, params);
    const auto b = train_fair(t, sep, params);
    CHECK(a.to_json().dump() == b.to_json().dump());
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (std::size_t i = 0; i < a.trajectory.size(); ++i) CHECK(a.trajectory[i].lambda == b.trajectory[i].lambda);

    const auto back = ReducedModel::from_json(nlohmann::json::parse(a.to_json().dump()));
    CHECK(predict(back, t) == predict(a, t));
    CHECK(back.to_json() == a.to_json());
  }

  TEST_CASE("reduction parameters are validated") {
    nlohmann::json j = ReductionParams{}.to_json();
    j["eta"] = -1.0;
    CHECK_THROWS_AS(ReductionParams::from_json(j), ConfigError);
    j = ReductionParams{}.to_json();
    j["max_iter"] = 0;
    CHECK_THROWS_AS(ReductionParams::from_json(j), ConfigError);
  }

  TEST_CASE("stratified split") {
    std::vector<int> strata;
    for (int i = 0; i < 103; ++i) strata.push_back(i % 4 == 0 ? 0 : (i % 3 == 0 ? 1 : 2));
    const Split s = stratified_split(strata, 0.3, 42);
    std::set<Eigen::Index> seen(s.train.begin(), s.train.end());
    for (auto i : s.test) CHECK(seen.insert(i).second);
    CHECK(seen.size() == strata.size());
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    CHECK(std::is_sorted(s.test.begin(), s.test.end()));
    std::map<int, int> total, test;
    for (int k : strata) ++total[k];
    for (auto i : s.test) ++test[strata[static_cast<std::size_t>(i)]];
    for (auto [k, n] : total) CHECK(test[k] == static_cast<int>(std::lround(0.3 * n)));
    const Split again = stratified_split(strata, 0.3, 42);
    CHECK(again.test == s.test);
    CHECK(stratified_split(strata, 0.3, 43).test != s.test);
  }
}
