// relform: batch simulator for relative formation control estimators.
//
//   relform run      --scenario FILE --out DIR [--set KEY=VALUE]... [--runs N] [--seed S]
//   relform compare  --scenario FILE --out DIR --estimators mle,rkf,jrkf,crkf [...]
//   relform validate --scenario FILE [--set KEY=VALUE]...

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "relform/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Relative formation control estimators: batch simulation"};
  app.require_subcommand(1);

  relform::CommandOptions opt;
  std::string estimators;
  int runs = 0;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--scenario", opt.scenario, "Scenario file")->required()->check(
        CLI::ExistingFile);
    if (needs_out) sub->add_option("--out", opt.out, "Output directory")->required();
    sub->add_option("--set", opt.overrides, "Override KEY=VALUE (repeatable)");
    sub->add_option("--runs", runs, "Monte Carlo run count");
    sub->add_option("--seed", seed, "Base seed");
  };

  auto* run = app.add_subcommand("run", "Run the scenario's estimator");
  add_common(run, true);
  auto* compare = app.add_subcommand("compare", "Run several estimators with paired seeds");
  add_common(compare, true);
  compare->add_option("--estimators", estimators, "Comma-separated estimator list")->required();
  auto* validate = app.add_subcommand("validate", "Check a scenario without simulating");
  add_common(validate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : relform::exit_config_error;
  }

  for (auto* sub : {run, compare, validate}) {
    if (sub->count("--runs")) opt.runs = runs;
    if (sub->count("--seed")) opt.seed = seed;
  }
  if (!estimators.empty()) {
    std::size_t start = 0;
    while (start <= estimators.size()) {
      const auto comma = estimators.find(',', start);
      opt.estimators.push_back(estimators.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }

  if (*run) return relform::cmd_run(opt);
  if (*compare) return relform::cmd_compare(opt);
  return relform::cmd_validate(opt);
}
