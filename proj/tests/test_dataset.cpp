#include "doctest.h"

#include "fairsep/dataset.hpp"
#include "support.hpp"

#include <filesystem>
#include <random>
#include <sstream>

using namespace fairsep;

namespace {

Table parse(const std::string& csv, const Schema& schema) {
  std::istringstream in(csv);
  return read_csv(in, schema);
}

Schema small_schema(const std::string& extra = "") {
  return Schema::from_json(nlohmann::json::parse(R"({"missing_marker": "?", "columns": [
    {"name": "g", "kind": "protected"},
    {"name": "x", "kind": "numerical", "tags": ["privilege"]},
    {"name": "lvl", "kind": "ordinal", "levels": ["low", "mid", "high"]},
    {"name": "label", "kind": "target", "positive_label": ["yes"]})" + extra + "]}"));
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("TOY8 loads with every row") {
    const Table t = testing::toy8();
    CHECK(t.rows() == 8);
    CHECK(t.dropped() == 0);
    CHECK(t.protected_column().levels == std::vector<std::string>{"F", "M"});
    CHECK(t.labels().sum() == 4.0);
    CHECK(t.privilege_column().spec.name == "cap");
    CHECK(t.effort_column().spec.name == "hours");
  }

  TEST_CASE("missing markers drop the row") {
    const Table t = parse("g,x,lvl,label\nA,1,low,yes\nB,?,mid,no\nB,3,high,no\nA,2,mid,no\n", small_schema());
    CHECK(t.rows() == 3);
    CHECK(t.dropped() == 1);
    CHECK(t.column("lvl").values[1] == 2.0);  // "high" ranks third
    CHECK(t.labels()[0] == 1.0);
  }

  TEST_CASE("empty file with a header gives an empty table") {
    const Table t = parse("g,x,lvl,label\n", small_schema());
    CHECK(t.rows() == 0);
  }

  TEST_CASE("parse errors carry the line number") {
    try {
      parse("g,x,lvl,label\nA,1,low,yes\nB,2,mid\n", small_schema());
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line == 3);
    }
    CHECK_THROWS_AS(parse("g,x,lvl,label\nA,abc,low,yes\nB,1,low,no\n", small_schema()), ParseError);
    CHECK_THROWS_AS(parse("g,x,lvl,label\nA,1,tiny,yes\nB,1,low,no\n", small_schema()), ParseError);
  }

  TEST_CASE("schema problems") {
    CHECK_THROWS_AS(parse("g,x,label\nA,1,yes\n", small_schema()), SchemaError);  // lvl absent
    const auto open_target = Schema::from_json(nlohmann::json::parse(R"({"columns": [
      {"name": "g", "kind": "protected"}, {"name": "label", "kind": "target"}]})"));
    CHECK_THROWS_AS(parse("g,label\nA,x\nB,y\nA,z\n", open_target), SchemaError);
    CHECK_THROWS_AS(Schema::from_json(nlohmann::json::parse(R"({"columns": [{"name": "g", "kind": "protected"}]})")),
                    SchemaError);
    CHECK_THROWS_AS(Schema::from_json(nlohmann::json::parse(
                        R"({"columns": [{"name": "g", "kind": "weird"}, {"name": "y", "kind": "target"}]})")),
                    SchemaError);
    CHECK_THROWS_AS(Schema::from_json(nlohmann::json::parse(
                        R"({"columns": [{"name": "c", "kind": "categorical", "tags": ["effort"]},
                                        {"name": "y", "kind": "target"}]})")),
                    SchemaError);
    CHECK_THROWS_AS(parse("g,x,lvl,label\nA,1,low,yes\nA,2,low,no\n", small_schema()), SchemaError);  // one group
  }

  TEST_CASE("schema JSON round trip") {
    const Schema s = Schema::load(testing::data_dir() / "adult_schema.json");
    CHECK(Schema::from_json(s.to_json()).to_json() == s.to_json());
  }

  TEST_CASE("quoted fields") {
    const Table t = parse("g,x,lvl,label\n\"A, inc\",1,low,yes\nB,\"2\",mid,no\n", small_schema());
    CHECK(t.protected_column().levels.front() == "A, inc");
    CHECK(t.column("x").values[1] == 2.0);
  }

  TEST_CASE("CSV round trip preserves values") {
    const Table t = testing::toy8();
    std::ostringstream out;
    write_csv(out, t);
    const Table back = parse(out.str(), t.schema());
    REQUIRE(back.rows() == t.rows());
    for (const auto& c : t.columns()) {
      CHECK(back.column(c.spec.name).values == c.values);
      CHECK(back.column(c.spec.name).levels == c.levels);
    }
  }

  TEST_CASE("subsets keep the levels of the parent") {
    const Table t = testing::toy8();
    const Table s = t.subset(std::vector<Eigen::Index>{0, 1, 2});
    CHECK(s.rows() == 3);
    CHECK(s.protected_column().levels == t.protected_column().levels);
    CHECK_THROWS_AS(t.subset(Mask::Constant(3, true)), AlignmentError);
  }

  TEST_CASE("privilege threshold is the smallest value with at most p% at or above it") {
    const Table t = testing::toy8();
    const auto th = privilege_threshold(t, 50.0);
    CHECK(th.tau == 10000.0);
    CHECK(th.realized_fraction == 0.5);
    CHECK_THROWS_AS(privilege_threshold(t, 5.0), DegenerateError);
    CHECK_THROWS_AS(privilege_threshold(t, 0.0), ConfigError);
    CHECK_THROWS_AS(privilege_threshold(t, 100.0), ConfigError);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      auto rows = testing::random_rows(rng);
      const Table r = testing::to_table(rows);
      std::vector<double> xp;
      for (const auto& row : rows) xp.push_back(row.xp);
      const double p = std::uniform_real_distribution<double>(1.0, 99.0)(rng);
      const auto ref = oracle::top_p_cutoff(xp, p);
      const bool constant = std::all_of(xp.begin(), xp.end(), [&](double v) { return v == xp.front(); });
      if (!ref || constant) {
        CHECK_THROWS_AS(privilege_threshold(r, p), DegenerateError);
        continue;
      }
      CHECK(privilege_threshold(r, p).tau == *ref);
    }
  }

  TEST_CASE("effort thresholds") {
    const Table t = testing::toy8();
    CHECK(effort_threshold(t, EffortScope::Global).global == 37.5);
    const auto g = effort_threshold(t, EffortScope::PerGroup);
    CHECK(g.per_group.at("F") == 40.0);
    CHECK(g.per_group.at("M") == 35.0);
    const auto c = effort_threshold(t, EffortScope::PerCategoryGroup, "occ");
    CHECK(c.per_cell.at({"A", "F"}) == 40.0);
    CHECK(c.per_cell.at({"A", "M"}) == 30.0);
    CHECK(c.per_cell.at({"B", "M"}) == 40.0);
    CHECK(c.fallbacks.empty());
    CHECK_THROWS_AS(effort_threshold(t, EffortScope::PerCategoryGroup), ConfigError);

    // one-row cell inherits the group mean
    const Table s = t.subset(std::vector<Eigen::Index>{0, 1, 2, 4, 5, 6, 7});
    const auto f = effort_threshold(s, EffortScope::PerCategoryGroup, "occ");
    CHECK(f.per_cell.at({"A", "F"}) == f.per_group.at("F"));
    CHECK(f.fallbacks.size() == 1);
  }

  TEST_CASE("encoder widths and standardization") {
    const Table t = testing::toy8();
    const Encoder enc = Encoder::fit(t);
    CHECK(enc.width() == 4);  // cap, hours, occ=A, occ=B
    const MatXd X = enc.transform(t);
    CHECK(X.rows() == 8);
    CHECK(std::abs(X.col(0).mean()) < 1e-12);
    CHECK(X.col(2).sum() + X.col(3).sum() == 8.0);
    const Encoder with = Encoder::fit(t, EncoderOptions{true});
    CHECK(with.width() == 6);
    CHECK(Encoder::from_json(enc.to_json()).transform(t) == X);

    const Table fs = t.subset(std::vector<Eigen::Index>{0, 1, 2, 3});
    const Encoder narrow = Encoder::fit(fs);
    CHECK(narrow.transform(t).cols() == narrow.width());
  }
}
