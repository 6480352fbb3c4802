// fairsep command-line entry point.
#include "fairsep/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  using fairsep::ExitCode;

  CLI::App app{"Fairness audits, privilege analysis and fair training on tabular data"};
  app.require_subcommand(1);

  std::string config_path;
  fairsep::Overrides o;
  std::string data, schema, out, predictions, model, notion;
  double p = 0, epsilon = 0;
  std::uint64_t seed = 0;

  for (const char* name : {"audit", "train", "extract-privilege", "sweep-p", "report"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run config JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--data", data, "data CSV");
    sub->add_option("--schema", schema, "schema JSON");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--notion", notion, "EP | DP | CDP | SEP | CSEP | SEP_RELAXED");
    sub->add_option("--p", p, "privileged top-p percent");
    sub->add_option("--epsilon", epsilon, "audit tolerance");
    sub->add_option("--seed", seed, "random seed");
    if (std::string(name) == "audit") {
      sub->add_option("--predictions", predictions, "one-column score CSV");
      sub->add_option("--model", model, "model JSON from train");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::Usage);
  }

  CLI::App* sub = app.get_subcommands().front();
  auto given = [&](const char* flag) { return sub->count(flag) > 0; };
  if (given("--data")) o.data = data;
  if (given("--schema")) o.schema = schema;
  if (given("--out")) o.out = out;
  if (given("--notion")) o.notion = notion;
  if (given("--p")) o.p = p;
  if (given("--epsilon")) o.epsilon = epsilon;
  if (given("--seed")) o.seed = seed;
  if (sub->get_name() == "audit") {
    if (given("--predictions")) o.predictions = predictions;
    if (given("--model")) o.model = model;
  }

  fairsep::RunConfig cfg;
  try {
    cfg = fairsep::apply(fairsep::RunConfig::load(config_path), o);
  } catch (const std::exception& e) {
    std::cerr << "fairsep: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Usage);
  }
  return static_cast<int>(fairsep::run_command(sub->get_name(), cfg, std::cerr));
}
