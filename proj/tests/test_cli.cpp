#include "doctest.h"

#include "fairsep/cli.hpp"
#include "support.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <random>
#include <sstream>

using namespace fairsep;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("fairsep_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

RunConfig toy_audit(const fs::path& out) {
  RunConfig c;
  c.data = testing::data_dir() / "toy8.csv";
  c.schema = testing::data_dir() / "toy8_schema.json";
  c.out = out;
  NotionConfig n;
  n.kind = NotionKind::SEP;
  n.p = 50.0;
  n.weighting.kind = ZetaKind::Unit;
  c.notion = n;
  return c;
}

// Synthetic table on disk: label mostly follows xp, F less often positive.
RunConfig synthetic(const fs::path& dir, std::size_t n = 600) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<oracle::Row> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    r.s = i % 2 ? "M" : "F";
    r.a = std::string(1, static_cast<char>('A' + i % 3));
    r.xp = std::round(1000.0 * u(rng));
    r.xe = std::round(20.0 + 40.0 * u(rng));
    r.y = u(rng) < (r.xp > (r.s == "M" ? 500.0 : 700.0) ? 0.9 : 0.1);
  }
  save_csv(dir / "data.csv", testing::to_table(rows));
  std::ofstream(dir / "schema.json") << testing::oracle_schema().to_json().dump(2);
  RunConfig c;
  c.data = dir / "data.csv";
  c.schema = dir / "schema.json";
  c.out = dir / "out";
  c.learner.max_iter = 10;
  return c;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("sha256 of a known file") {
    Scratch s("sha");
    std::ofstream(s.dir / "abc.txt", std::ios::binary) << "abc";
    CHECK(sha256_file(s.dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("audit TOY8 SEP matches the metric module and fails the tolerance") {
    Scratch s("audit");
    RunConfig c = toy_audit(s.dir);
    c.use_labels = true;
    std::ostringstream err;
    CHECK(run_command("audit", c, err) == ExitCode::AuditFail);
    const auto report = read(s.dir / "audit_report.json");
    CHECK(report["groups"]["F"]["T2"] == 1.0);
    CHECK(report["groups"]["F"]["T3"] == 0.0);
    CHECK(report["groups"]["M"]["T1"] == 0.5);
    CHECK(report["aggregate"] == 1.0);
    CHECK(report["partial"] == false);

    const std::string stats = slurp(s.dir / "audit_stats.csv");
    CHECK(stats.find("overall,*,F,4,2,0,2,0,0.5,1,0,1\n") != std::string::npos);
    CHECK(stats.find("high_effort_underprivileged,*,M,") != std::string::npos);
  }

  TEST_CASE("audit with ground truth and DP reports the ground-truth gap") {
    Scratch s("audit_dp");
    RunConfig c = toy_audit(s.dir);
    c.use_labels = true;
    c.notion->kind = NotionKind::DP;
    std::ostringstream err;
    CHECK(run_command("audit", c, err) == ExitCode::Ok);
    const Table t = testing::toy8();
    CHECK(read(s.dir / "audit_report.json")["aggregate"].get<double>() ==
          evaluate(t, t.labels(), *c.notion).aggregate);
  }

  TEST_CASE("audit from a predictions file") {
    Scratch s("audit_preds");
    save_predictions(s.dir / "h.csv", testing::toy8_predictions());
    RunConfig c = toy_audit(s.dir);
    c.predictions = s.dir / "h.csv";
    std::ostringstream err;
    CHECK(run_command("audit", c, err) == ExitCode::AuditFail);
    CHECK(read(s.dir / "audit_report.json")["aggregate"] == 2.125);
  }

  TEST_CASE("usage errors exit with 2, runtime errors with 3") {
    Scratch s("usage");
    std::ostringstream err;
    RunConfig c = toy_audit(s.dir);
    CHECK(run_command("audit", c, err) == ExitCode::Usage);  // no prediction source
    c.use_labels = true;
    c.data = s.dir / "missing.csv";
    CHECK(run_command("audit", c, err) == ExitCode::Usage);
    c = toy_audit(s.dir);
    c.use_labels = true;
    c.notion.reset();
    CHECK(run_command("audit", c, err) == ExitCode::Usage);
    CHECK(run_command("bogus", c, err) == ExitCode::Usage);

    std::ofstream(s.dir / "short.csv") << "score\n0.5\n";
    c = toy_audit(s.dir);
    c.predictions = s.dir / "short.csv";
    CHECK(run_command("audit", c, err) == ExitCode::Runtime);  // misaligned predictions
    CHECK(err.str().find("fairsep audit:") != std::string::npos);
  }

  TEST_CASE("config parsing and overrides") {
    CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json{{"dtaa", "x"}}), ConfigError);
    CHECK_THROWS_AS(NotionConfig::from_json(nlohmann::json{{"kind", "CDP"}, {"conditional_column", "a"}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json{{"test_fraction", 1.5}}), ConfigError);
    const RunConfig c = RunConfig::from_json(nlohmann::json{{"data", "a.csv"}, {"notion", {{"kind", "CDP"}, {"p", 7}}}});
    CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());

    Overrides o;
    o.data = "b.csv";
    o.p = 3.0;
    o.notion = "csep";
    o.seed = 9;
    const RunConfig d = apply(c, o);
    CHECK(d.data == "b.csv");
    CHECK(d.notion->p == 3.0);
    CHECK(d.notion->kind == NotionKind::CSEP);
    CHECK(d.seed == 9);
    Overrides bad;
    bad.epsilon = 0.1;
    CHECK_THROWS_AS(apply(RunConfig{}, bad), ConfigError);
  }

  TEST_CASE("train writes the model, trajectory and held-out audit; reruns are byte-identical") {
    Scratch s("train");
    RunConfig c = synthetic(s.dir);
    NotionConfig dp;
    dp.kind = NotionKind::DP;
    c.notion = dp;
    std::ostringstream err;
    REQUIRE(run_command("train", c, err) == ExitCode::Ok);
    for (const char* f : {"model.json", "trajectory.csv", "test_data.csv", "test_predictions.csv", "test_report.json",
                          "test_stats.csv", "train_summary.json", "run_manifest.json"})
      CHECK(fs::is_regular_file(c.out / f));
    const auto summary = read(c.out / "train_summary.json");
    CHECK(summary["test_rows"] == 180);
    CHECK(summary["train_rows"] == 420);

    const auto manifest = read(c.out / "run_manifest.json");
    std::vector<std::string> paths;
    for (const auto& e : manifest["files"]) {
      paths.push_back(e["path"]);
      CHECK(e["sha256"] == sha256_file(c.out / e["path"].get<std::string>()));
      CHECK(e["command"] == "fairsep train");
    }
    CHECK(std::is_sorted(paths.begin(), paths.end()));

    const std::string first = slurp(c.out / "run_manifest.json");
    fs::remove_all(c.out);
    REQUIRE(run_command("train", c, err) == ExitCode::Ok);
    CHECK(slurp(c.out / "run_manifest.json") == first);
  }

  TEST_CASE("unconstrained training equals the plain base learner") {
    Scratch s("baseline");
    RunConfig c = synthetic(s.dir);
    c.unconstrained = true;
    std::ostringstream err;
    REQUIRE(run_command("train", c, err) == ExitCode::Ok);
    const auto model = ReducedModel::from_json(read(c.out / "model.json"));
    REQUIRE(model.members.size() == 1);

    const Table t = load_csv(c.data, Schema::load(c.schema));
    const Split split = stratified_split(t, c.test_fraction, c.seed);
    const Table train = t.subset(split.train);
    const Encoder enc = Encoder::fit(train);
    BaseParams base = c.learner.base;
    base.seed = c.seed;
    const auto direct = fit_base(enc.transform(train), train.labels(), std::nullopt, base);
    CHECK(model.members[0].weights == direct.weights);
  }

  TEST_CASE("sweep-p, extract-privilege and report") {
    Scratch s("pipeline");
    RunConfig c = synthetic(s.dir);
    c.extraction.repeats = 3;
    std::ostringstream err;
    CHECK(run_command("sweep-p", c, err) == ExitCode::Ok);
    CHECK(read(c.out / "sweep.json")["rows"].size() == 20);
    CHECK(run_command("extract-privilege", c, err) == ExitCode::Ok);
    CHECK(read(c.out / "importance.json")["chosen"] == "xp");

    NotionConfig csep;
    csep.kind = NotionKind::CSEP;
    csep.conditional_column = "a";
    csep.p = 10.0;
    c.notion = csep;
    RunConfig a = c, b = c;
    a.out = s.dir / "run_a";
    a.unconstrained = true;
    b.out = s.dir / "run_b";
    REQUIRE(run_command("train", a, err) == ExitCode::Ok);
    REQUIRE(run_command("train", b, err) == ExitCode::Ok);

    RunConfig r = c;
    r.out = s.dir / "report";
    r.runs = {{"baseline", a.out}, {"csep", b.out}, {"ghost", s.dir / "nowhere"}};
    REQUIRE(run_command("report", r, err) == ExitCode::Ok);
    for (const char* f : {"fig_ground_truth_a.svg", "fig_baseline_a.svg", "fig_csep_subgroups.svg",
                          "fig_ppr_ratio_by_effort.svg", "summary.md"})
      CHECK(fs::is_regular_file(r.out / f));
    const std::string summary = slurp(r.out / "summary.md");
    CHECK(summary.find("run 'ghost' skipped") != std::string::npos);

    const std::string svg = slurp(r.out / "fig_ppr_ratio_by_effort.svg");
    fs::remove_all(r.out);
    REQUIRE(run_command("report", r, err) == ExitCode::Ok);
    CHECK(slurp(r.out / "fig_ppr_ratio_by_effort.svg") == svg);
  }
}
