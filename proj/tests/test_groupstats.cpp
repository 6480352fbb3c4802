#include "doctest.h"

#include "fairsep/groupstats.hpp"
#include "support.hpp"

#include <filesystem>
#include <random>

using namespace fairsep;

TEST_SUITE("groupstats") {
  TEST_CASE("label predicate selects the positive rows") {
    const Table t = testing::toy8();
    const Mask m = mask(t, Predicate().label(1));
    CHECK(count(m) == 4);
    for (Eigen::Index i = 0; i < m.size(); ++i) CHECK(m[i] == (t.labels()[i] == 1.0));
  }

  TEST_CASE("TOY8 confusion counts") {
    const Table t = testing::toy8();
    const auto f = stats(t, testing::toy8_predictions(), Predicate());
    CHECK(f.tp == 3);
    CHECK(f.fp == 2);
    CHECK(f.tn == 2);
    CHECK(f.fn == 1);
    CHECK(f.ppr == 5.0 / 8.0);
    CHECK(f.tpr == 0.75);
    CHECK(f.fpr == 0.5);

    const auto female_rich = stats(t, testing::toy8_predictions(), Predicate().equals("sex", "F").at_least("cap", 10000));
    CHECK(female_rich.n == 2);
    CHECK(female_rich.tp == 1);
    CHECK(female_rich.fp == 1);
  }

  TEST_CASE("expected mode uses the scores as probabilities") {
    const Table t = testing::toy8();
    VecXd h = VecXd::Constant(8, 0.25);
    const auto f = stats(t, h, Predicate(), RateOptions{RateMode::Expected, 0.5});
    CHECK(f.ppr == 0.25);
    CHECK(f.tp == 1.0);
    const auto hard = stats(t, h, Predicate(), RateOptions{RateMode::Hard, 0.5});
    CHECK(hard.ppr == 0.0);
    CHECK(stats(t, h, Predicate(), RateOptions{RateMode::Hard, 0.25}).ppr == 1.0);  // cutoff is inclusive
  }

  TEST_CASE("undefined rates are flagged, not faked") {
    const Table t = testing::toy8();
    const auto none = stats(t, testing::toy8_predictions(), Predicate().equals("sex", "F").at_least("cap", 20000));
    CHECK(none.empty);
    CHECK_FALSE(none.tpr_defined);
    const auto negatives_only = stats(t, testing::toy8_predictions(), Predicate().label(0));
    CHECK_FALSE(negatives_only.tpr_defined);
    CHECK(negatives_only.fpr_defined);
  }

  TEST_CASE("per-row thresholds") {
    const Table t = testing::toy8();
    VecXd cut = VecXd::Constant(8, 40.0);
    cut[7] = 50.0;
    CHECK(count(mask(t, Predicate().at_least("hours", cut))) == 3);
    CHECK(count(mask(t, Predicate().below("hours", cut))) == 5);
    CHECK_THROWS_AS(mask(t, Predicate().at_least("hours", VecXd::Zero(3))), AlignmentError);
  }

  TEST_CASE("predicate errors") {
    const Table t = testing::toy8();
    CHECK_THROWS(mask(t, Predicate().equals("nope", "x")));
    CHECK_THROWS_AS(mask(t, Predicate().at_least("occ", 1.0)), PredicateError);
  }

  TEST_CASE("prediction checks") {
    const Table t = testing::toy8();
    CHECK_THROWS_AS(check_predictions(t, VecXd::Zero(7)), AlignmentError);
    VecXd bad = VecXd::Zero(8);
    bad[2] = 1.5;
    CHECK_THROWS_AS(check_predictions(t, bad), Error);
    CHECK_THROWS_AS(positive_values(VecXd::Zero(8), RateOptions{RateMode::Hard, 1.0}), ConfigError);
  }

  TEST_CASE("prediction files round trip") {
    const auto path = std::filesystem::temp_directory_path() / "fairsep_preds_test.csv";
    VecXd h(4);
    h << 0.1, 0.5, 1.0 / 3.0, 1.0;
    save_predictions(path, h);
    CHECK(load_predictions(path) == h);
    std::filesystem::remove(path);
  }

  TEST_CASE("masks agree with a direct scan on random tables") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      const auto rows = testing::random_rows(rng);
      const Table t = testing::to_table(rows);
      const Mask m = mask(t, Predicate().equals("s", "F").below("xp", 2000).at_least("xe", 30).label(0));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        CHECK(m[static_cast<Eigen::Index>(i)] == (r.s == "F" && r.xp < 2000 && r.xe >= 30 && r.y == 0));
      }
    }
  }
}
