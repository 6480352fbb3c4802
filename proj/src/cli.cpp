#include "fairsep/cli.hpp"

#include "fairsep/report.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

namespace fairsep {

namespace {

using json = nlohmann::json;

const std::set<std::string> kConfigKeys = {
    "data",        "schema",       "out",        "seed",           "notion",          "predictions",
    "model",       "use_labels",   "learner",    "test_fraction",  "include_protected", "unconstrained",
    "extraction",  "sweep",        "runs",       "category_column", "effort_edges",    "report",
    "plots"};

std::string num(double v) { return fmt::format("{}", v); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void require_file(const fs::path& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path.string());
}

Table load_table(const RunConfig& cfg) {
  require_file(cfg.schema, "schema");
  require_file(cfg.data, "data");
  return load_csv(cfg.data, Schema::load(cfg.schema));
}

std::string slug(const std::string& s) {
  std::string out;
  for (unsigned char c : s) out += std::isalnum(c) ? static_cast<char>(std::tolower(c)) : '_';
  return out.empty() ? "run" : out;
}

double accuracy(const Table& t, const VecXd& scores, const RateOptions& rates) {
  if (t.rows() == 0) return 0.0;
  const VecXd pos = positive_values(scores, rates);
  return 1.0 - (pos - t.labels()).cwiseAbs().mean();
}

// Context used for the per-subgroup stats table: the audited notion, or plain
// demographic parity over the protected column when there is none.
NotionContext stats_context(const Table& t, const std::optional<NotionConfig>& notion) {
  if (notion) return prepare(t, *notion);
  NotionConfig dp;
  dp.kind = NotionKind::DP;
  return prepare(t, dp);
}

void write_stats(const fs::path& path, const NotionContext& ctx, const VecXd& scores) {
  const Table& t = *ctx.table;
  const RateOptions& rates = ctx.config.rates;
  std::ostringstream out;
  out << "scope,category,group,n,tp,fp,tn,fn,ppr,tpr,fpr,ppr_ratio_to_max\n";

  auto block = [&](const std::string& scope, const std::string& category, const Mask& within) {
    std::vector<SubgroupFrame> frames;
    double top = 0.0;
    for (const Mask& g : ctx.group_masks) {
      frames.push_back(stats(t, scores, Mask(g && within), rates));
      if (!frames.back().empty) top = std::max(top, frames.back().ppr);
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const SubgroupFrame& f = frames[i];
      out << scope << ',' << category << ',' << ctx.groups[i] << ',' << f.n << ',' << num(f.tp) << ',' << num(f.fp)
          << ',' << num(f.tn) << ',' << num(f.fn) << ',' << (f.empty ? "" : num(f.ppr)) << ','
          << (f.tpr_defined ? num(f.tpr) : "") << ',' << (f.fpr_defined ? num(f.fpr) : "") << ','
          << (!f.empty && top > 0.0 ? num(f.ppr / top) : "") << '\n';
    }
  };

  const Mask all = all_rows(static_cast<Eigen::Index>(t.rows()));
  block("overall", "*", all);
  if (ctx.config.conditional())
    for (std::size_t c = 0; c < ctx.categories.size(); ++c) block("category", ctx.categories[c], ctx.category_masks[c]);
  if (ctx.privilege) {
    block("privileged", "*", ctx.privileged);
    block("underprivileged", "*", Mask(!ctx.privileged));
    if (ctx.effort) block("high_effort_underprivileged", "*", Mask(!ctx.privileged && ctx.high));
  }
  write_text(path, out.str());
}

std::string sha256_hex(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw Error("sha256 failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

struct LoadedRun {
  ReportRun run;
  Table test;
  VecXd scores;
  std::string data_hash;
};

}  // namespace

// Config -------------------------------------------------------------------------------

json RunConfig::to_json() const {
  json runs_j = json::array();
  for (const auto& r : runs) runs_j.push_back({{"label", r.label}, {"dir", r.dir.generic_string()}});
  return {{"data", data.generic_string()},
          {"schema", schema.generic_string()},
          {"out", out.generic_string()},
          {"seed", seed},
          {"notion", notion ? notion->to_json() : json()},
          {"predictions", predictions.generic_string()},
          {"model", model.generic_string()},
          {"use_labels", use_labels},
          {"learner", learner.to_json()},
          {"test_fraction", test_fraction},
          {"include_protected", include_protected},
          {"unconstrained", unconstrained},
          {"extraction", extraction.to_json()},
          {"sweep", sweep.to_json()},
          {"runs", runs_j},
          {"category_column", category_column},
          {"effort_edges", effort_edges},
          {"report", {{"mode", to_string(report_rates.mode)}, {"cutoff", report_rates.cutoff}}},
          {"plots",
           {{"category_bars", plots.category_bars},
            {"subgroup_panels", plots.subgroup_panels},
            {"effort_ratio", plots.effort_ratio}}}};
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kConfigKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  RunConfig c;
  try {
    c.data = j.value("data", std::string{});
    c.schema = j.value("schema", std::string{});
    c.out = j.value("out", c.out.string());
    c.seed = j.value("seed", c.seed);
    if (j.contains("notion") && !j["notion"].is_null()) c.notion = NotionConfig::from_json(j["notion"]);
    c.predictions = j.value("predictions", std::string{});
    c.model = j.value("model", std::string{});
    c.use_labels = j.value("use_labels", c.use_labels);
    if (j.contains("learner")) c.learner = ReductionParams::from_json(j["learner"]);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.include_protected = j.value("include_protected", c.include_protected);
    c.unconstrained = j.value("unconstrained", c.unconstrained);
    if (j.contains("extraction")) c.extraction = ExtractionOptions::from_json(j["extraction"]);
    if (j.contains("sweep")) c.sweep = SweepOptions::from_json(j["sweep"]);
    if (j.contains("runs"))
      for (const auto& r : j["runs"]) c.runs.push_back({r.at("label").get<std::string>(), r.at("dir").get<std::string>()});
    c.category_column = j.value("category_column", c.category_column);
    c.effort_edges = j.value("effort_edges", c.effort_edges);
    if (j.contains("report")) {
      const auto& r = j["report"];
      if (r.contains("mode")) c.report_rates.mode = rate_mode_from_string(r["mode"].get<std::string>());
      c.report_rates.cutoff = r.value("cutoff", c.report_rates.cutoff);
    }
    if (j.contains("plots")) {
      const auto& p = j["plots"];
      c.plots.category_bars = p.value("category_bars", c.plots.category_bars);
      c.plots.subgroup_panels = p.value("subgroup_panels", c.plots.subgroup_panels);
      c.plots.effort_ratio = p.value("effort_ratio", c.plots.effort_ratio);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  return c;
}

RunConfig RunConfig::load(const fs::path& path) { return from_json(read_json(path)); }

RunConfig apply(RunConfig cfg, const Overrides& o) {
  if (o.data) cfg.data = *o.data;
  if (o.schema) cfg.schema = *o.schema;
  if (o.out) cfg.out = *o.out;
  if (o.predictions) cfg.predictions = *o.predictions;
  if (o.model) cfg.model = *o.model;
  if (o.seed) cfg.seed = *o.seed;
  if (o.notion) {
    if (!cfg.notion) cfg.notion = NotionConfig{};
    cfg.notion->kind = notion_kind_from_string(*o.notion);
  }
  if (o.p || o.epsilon) {
    if (!cfg.notion) throw ConfigError("--p / --epsilon need a notion");
    if (o.p) cfg.notion->p = *o.p;
    if (o.epsilon) cfg.notion->epsilon = *o.epsilon;
  }
  return cfg;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

// Commands ----------------------------------------------------------------------------

CommandOutput cmd_audit(const RunConfig& cfg) {
  if (!cfg.notion) throw ConfigError("audit needs a notion");
  const int sources = int(!cfg.predictions.empty()) + int(!cfg.model.empty()) + int(cfg.use_labels);
  if (sources != 1) throw ConfigError("audit needs exactly one of predictions, model or use_labels");
  const Table t = load_table(cfg);

  VecXd scores;
  if (cfg.use_labels) {
    scores = t.labels();
  } else if (!cfg.predictions.empty()) {
    require_file(cfg.predictions, "predictions");
    scores = load_predictions(cfg.predictions);
  } else {
    require_file(cfg.model, "model");
    scores = predict(ReducedModel::from_json(read_json(cfg.model)), t, PredictMode::Score);
  }
  check_predictions(t, scores);

  const NotionContext ctx = prepare(t, *cfg.notion);
  const ViolationReport report = evaluate(ctx, scores);
  CommandOutput result;
  write_json(cfg.out / "audit_report.json", report.to_json());
  write_stats(cfg.out / "audit_stats.csv", ctx, scores);
  result.files = {"audit_report.json", "audit_stats.csv"};
  result.code = report.pass ? ExitCode::Ok : ExitCode::AuditFail;
  result.message = fmt::format("{} aggregate {:.4f} (epsilon {}){}: {}", to_string(report.notion), report.aggregate,
                               report.epsilon, report.partial ? ", partial" : "", report.pass ? "pass" : "fail");
  return result;
}

CommandOutput cmd_train(const RunConfig& cfg) {
  const Table t = load_table(cfg);
  const Split split = stratified_split(t, cfg.test_fraction, cfg.seed);
  const Table train = t.subset(split.train);
  const Table test = t.subset(split.test);

  ReductionParams params = cfg.learner;
  params.seed = cfg.seed;
  params.base.seed = cfg.seed;
  const std::optional<NotionConfig> notion = cfg.unconstrained ? std::nullopt : cfg.notion;
  const ReducedModel model = train_fair(train, notion, params, EncoderOptions{cfg.include_protected});

  CommandOutput result;
  write_json(cfg.out / "model.json", model.to_json());

  std::ostringstream traj;
  traj << "iteration,member_error,member_max_violation,mixture_error,mixture_max_violation,objective,lambda_sum\n";
  for (const auto& r : model.trajectory)
    traj << r.iteration << ',' << num(r.member_error) << ',' << num(r.member_max_violation) << ','
         << num(r.mixture_error) << ',' << num(r.mixture_max_violation) << ',' << num(r.objective) << ','
         << num(r.lambda.sum()) << '\n';
  write_text(cfg.out / "trajectory.csv", traj.str());

  const VecXd scores = predict(model, test, PredictMode::Score);
  save_csv(cfg.out / "test_data.csv", test);
  save_predictions(cfg.out / "test_predictions.csv", scores);
  result.files = {"model.json", "trajectory.csv", "test_data.csv", "test_predictions.csv"};

  const RateOptions rates = cfg.notion ? cfg.notion->rates : RateOptions{};
  json summary{{"train_rows", train.rows()},
               {"test_rows", test.rows()},
               {"dropped_rows", t.dropped()},
               {"constrained", notion.has_value()},
               {"members", model.members.size()},
               {"best_iteration", model.best_iteration},
               {"final_max_violation", model.final_max_violation},
               {"early_stopped", model.early_stopped},
               {"rates", {{"mode", to_string(rates.mode)}, {"cutoff", rates.cutoff}}},
               {"test_accuracy", accuracy(test, scores, rates)},
               {"warnings", model.warnings}};

  const NotionContext ctx = stats_context(test, cfg.notion);
  if (cfg.notion) {
    const ViolationReport report = evaluate(ctx, scores);
    write_json(cfg.out / "test_report.json", report.to_json());
    result.files.push_back("test_report.json");
    summary["test_aggregate"] = report.aggregate;
    summary["test_pass"] = report.pass;
  }
  write_stats(cfg.out / "test_stats.csv", ctx, scores);
  write_json(cfg.out / "train_summary.json", summary);
  result.files.push_back("test_stats.csv");
  result.files.push_back("train_summary.json");

  result.message = fmt::format("{} members, test accuracy {:.4f}, training max violation {:.4f}{}",
                               model.members.size(), summary["test_accuracy"].get<double>(), model.final_max_violation,
                               model.warnings.empty() ? "" : " (see warnings in model.json)");
  return result;
}

CommandOutput cmd_extract_privilege(const RunConfig& cfg) {
  const Table t = load_table(cfg);
  ExtractionOptions options = cfg.extraction;
  options.seed = cfg.seed;
  options.base.seed = cfg.seed;
  if (options.group.empty()) {
    const auto groups = groups_by_advantage(t);
    if (groups.size() < 2) throw DegenerateError("need two protected groups to pick the disadvantaged one");
    options.group = groups[1];
  }
  const ImportanceTable table = extract_privilege_attribute(t, options);
  std::ostringstream csv;
  table.write_csv(csv);
  write_text(cfg.out / "importance.csv", csv.str());
  write_json(cfg.out / "importance.json", table.to_json());
  CommandOutput result;
  result.files = {"importance.csv", "importance.json"};
  result.message = fmt::format("privilege source for group {}: {}{}", table.group, table.chosen,
                               table.tie ? " (tied with the runner-up)" : "");
  return result;
}

CommandOutput cmd_sweep_p(const RunConfig& cfg) {
  const Table t = load_table(cfg);
  SweepOptions options = cfg.sweep;
  if (options.grid.empty())
    for (int p = 1; p <= 20; ++p) options.grid.push_back(p);
  const PSweepResult sweep = select_p(t, options);
  std::ostringstream csv;
  sweep.write_csv(csv);
  write_text(cfg.out / "sweep.csv", csv.str());
  write_json(cfg.out / "sweep.json", sweep.to_json());
  CommandOutput result;
  result.files = {"sweep.csv", "sweep.json"};
  result.message = sweep.selected ? fmt::format("selected p = {}", *sweep.selected) : "no p satisfies the rule";
  return result;
}

CommandOutput cmd_report(const RunConfig& cfg) {
  require_file(cfg.schema, "schema");
  const Schema schema = Schema::load(cfg.schema);
  const double p = cfg.notion ? cfg.notion->p : 5.0;
  const std::string category =
      !cfg.category_column.empty() ? cfg.category_column : (cfg.notion ? cfg.notion->conditional_column : "");

  CommandOutput result;
  std::vector<std::string> notes;
  std::vector<std::pair<std::string, std::string>> figures;  // file, caption
  auto emit = [&](const std::string& file, const std::string& svg, const std::string& caption) {
    write_text(cfg.out / file, svg);
    result.files.push_back(file);
    figures.emplace_back(file, caption);
  };

  if (cfg.plots.category_bars) {
    if (category.empty()) {
      notes.push_back("category bars skipped: no category column configured");
    } else if (cfg.data.empty()) {
      notes.push_back("ground-truth category bars skipped: no data file configured");
    } else {
      require_file(cfg.data, "data");
      const Table t = load_csv(cfg.data, schema);
      emit("fig_ground_truth_" + slug(category) + ".svg",
           render_bars(grouped_bars_by_category(t, t.labels(), category, RateOptions{},
                                                "Ground truth by " + category)),
           "Ground-truth labels per " + category + " and group");
    }
  }

  std::vector<LoadedRun> runs;
  for (const auto& r : cfg.runs) {
    const fs::path data = r.dir / "test_data.csv", preds = r.dir / "test_predictions.csv";
    if (!fs::is_regular_file(data) || !fs::is_regular_file(preds)) {
      notes.push_back(fmt::format("run '{}' skipped: missing test_data.csv or test_predictions.csv in {}", r.label,
                                  r.dir.generic_string()));
      continue;
    }
    LoadedRun run{r, load_csv(data, schema), load_predictions(preds), sha256_file(data)};
    check_predictions(run.test, run.scores);
    runs.push_back(std::move(run));
  }

  std::vector<std::string> metrics;
  for (const auto& run : runs) {
    const std::string name = slug(run.run.label);
    const Table& t = run.test;
    std::string line = fmt::format("| {} | {:.4f} |", run.run.label, accuracy(t, run.scores, cfg.report_rates));
    const Column& s = t.protected_column();
    for (const auto& g : s.levels) {
      const SubgroupFrame f = stats(t, run.scores, Predicate().equals(s.spec.name, g), cfg.report_rates);
      line += f.empty ? " - |" : fmt::format(" {:.4f} |", f.ppr);
    }
    metrics.push_back(line);

    if (cfg.plots.category_bars && !category.empty())
      emit("fig_" + name + "_" + slug(category) + ".svg",
           render_bars(grouped_bars_by_category(t, run.scores, category, cfg.report_rates,
                                                run.run.label + ": predictions by " + category)),
           run.run.label + ": predicted outcomes per " + category + " and group");
    if (cfg.plots.subgroup_panels)
      emit("fig_" + name + "_subgroups.svg",
           render_panels(subgroup_panels(t, run.scores, p, cfg.report_rates, run.run.label)),
           run.run.label + ": PPR/TPR/FPR in privileged, underprivileged and high-effort underprivileged rows");
  }

  if (cfg.plots.effort_ratio) {
    if (runs.empty()) {
      notes.push_back("effort ratio chart skipped: no runs to compare");
    } else if (std::any_of(runs.begin(), runs.end(),
                           [&](const LoadedRun& r) { return r.data_hash != runs.front().data_hash; })) {
      notes.push_back("effort ratio chart skipped: runs were evaluated on different test rows");
    } else {
      std::vector<EffortSeries> series;
      for (const auto& r : runs) series.push_back({r.run.label, r.scores});
      emit("fig_ppr_ratio_by_effort.svg",
           render_lines(ppr_ratio_by_effort(runs.front().test, series, p, cfg.effort_edges, cfg.report_rates)),
           "PPR ratio (disadvantaged/advantaged) among underprivileged rows per effort bin");
    }
  }

  std::ostringstream md;
  md << "# fairsep report\n\n";
  md << fmt::format("Decisions counted in `{}` mode (cutoff {}); privilege cutoff top {}%.\n\n",
                    to_string(cfg.report_rates.mode), cfg.report_rates.cutoff, p);
  if (!runs.empty()) {
    const Column& s = runs.front().test.protected_column();
    md << "| run | accuracy |";
    for (const auto& g : s.levels) md << " PPR " << g << " |";
    md << "\n|---|---|";
    for (std::size_t i = 0; i < s.levels.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& m : metrics) md << m << '\n';
    md << '\n';
  }
  md << "## Figures\n\n";
  if (figures.empty()) md << "No figures were produced.\n";
  for (const auto& [file, caption] : figures) md << "- [" << file << "](" << file << "): " << caption << '\n';
  if (!notes.empty()) {
    md << "\n## Notes\n\n";
    for (const auto& n : notes) md << "- " << n << '\n';
  }
  write_text(cfg.out / "summary.md", md.str());
  result.files.push_back("summary.md");
  result.message = fmt::format("{} figures, {} notes", figures.size(), notes.size());
  return result;
}

// Manifest / dispatch -----------------------------------------------------------------

void update_manifest(const fs::path& out, const std::string& command, const RunConfig& cfg,
                     const std::vector<std::string>& files) {
  const fs::path path = out / "run_manifest.json";
  std::map<std::string, json> entries;
  if (fs::is_regular_file(path)) {
    const json old = read_json(path);
    for (const auto& e : old.value("files", json::array())) entries[e.at("path").get<std::string>()] = e;
  }
  const std::string config_hash = sha256_hex(cfg.to_json().dump());
  for (const auto& f : files)
    entries[f] = {{"path", f},
                  {"sha256", sha256_file(out / f)},
                  {"command", "fairsep " + command},
                  {"config_sha256", config_hash}};
  json list = json::array();
  for (auto& [k, v] : entries) list.push_back(std::move(v));
  write_json(path, {{"format", "fairsep-manifest/1"}, {"files", list}});
}

ExitCode run_command(const std::string& command, const RunConfig& cfg, std::ostream& err) {
  using Fn = CommandOutput (*)(const RunConfig&);
  static const std::map<std::string, Fn> table = {{"audit", cmd_audit},
                                                  {"train", cmd_train},
                                                  {"extract-privilege", cmd_extract_privilege},
                                                  {"sweep-p", cmd_sweep_p},
                                                  {"report", cmd_report}};
  const auto it = table.find(command);
  if (it == table.end()) {
    err << "fairsep: unknown command '" << command << "'\n";
    return ExitCode::Usage;
  }
  try {
    fs::create_directories(cfg.out);
    const CommandOutput result = it->second(cfg);
    update_manifest(cfg.out, command, cfg, result.files);
    err << "fairsep " << command << ": " << result.message << '\n';
    return result.code;
  } catch (const ConfigError& e) {
    err << "fairsep " << command << ": " << e.what() << '\n';
    return ExitCode::Usage;
  } catch (const SchemaError& e) {
    err << "fairsep " << command << ": " << e.what() << '\n';
    return ExitCode::Usage;
  } catch (const PredicateError& e) {
    err << "fairsep " << command << ": " << e.what() << '\n';
    return ExitCode::Usage;
  } catch (const std::exception& e) {
    err << "fairsep " << command << ": " << e.what() << '\n';
    return ExitCode::Runtime;
  }
}

}  // namespace fairsep
