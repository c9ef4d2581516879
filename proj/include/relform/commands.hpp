#pragma once

// run / compare / validate subcommands. The CLI binary is a thin argument
// parser over these functions.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relform/errors.hpp"
#include "relform/scenario_io.hpp"
#include "relform/simkit.hpp"

namespace relform {

enum ExitCode : int { exit_ok = 0, exit_config_error = 2, exit_runtime_failure = 3 };

struct CommandOptions {
  std::filesystem::path scenario;
  std::filesystem::path out;
  std::vector<std::string> overrides;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> estimators;
};

namespace detail {

inline Scenario load_for_command(const CommandOptions& opt) {
  std::vector<std::string> ov = opt.overrides;
  if (opt.runs) ov.push_back("sim.runs=" + std::to_string(*opt.runs));
  if (opt.seed) ov.push_back("sim.seed=" + std::to_string(*opt.seed));
  return load_scenario(opt.scenario, ov);
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

/// Unique column labels: repeated estimators get a _2, _3 ... suffix.
inline std::vector<std::string> unique_labels(const std::vector<EstimatorKind>& kinds) {
  std::map<std::string, int> seen;
  std::vector<std::string> labels;
  for (EstimatorKind k : kinds) {
    std::string base(k == EstimatorKind::oracle ? "oracle" : to_string(k));
    const int n = ++seen[base];
    labels.push_back(n == 1 ? base : base + "_" + std::to_string(n));
  }
  return labels;
}

/// Runs each estimator's Monte Carlo and writes trace_<label>.csv,
/// summary.csv, steady_state.csv and the resolved scenario.ini.
inline int execute(const Scenario& scenario, const std::vector<EstimatorKind>& kinds,
                   const std::filesystem::path& out_dir, std::ostream& log, std::ostream& err) {
  std::filesystem::create_directories(out_dir);
  {
    auto f = open_output(out_dir / "scenario.ini");
    write_scenario(f, scenario);
  }
  const Simulation sim(scenario);
  const auto labels = unique_labels(kinds);
  const std::size_t keep = scenario.trace_runs < 0 ? static_cast<std::size_t>(scenario.runs)
                                                   : static_cast<std::size_t>(scenario.trace_runs);

  std::vector<LabelledSummary> summaries;
  bool failed = false;
  for (std::size_t e = 0; e < kinds.size(); ++e) {
    MonteCarloOptions mc;
    mc.threads = scenario.threads;
    mc.keep_traces = keep;
    mc.record = {scenario.trace_stride, false, false};
    MonteCarloResult res = run_monte_carlo(sim, kinds[e], mc);

    auto f = open_output(out_dir / ("trace_" + labels[e] + ".csv"));
    write_trace_header(f, sim.op());
    for (const auto& [run, trace] : res.traces) write_trace_rows(f, run, labels[e], trace);

    for (const auto& [run, failure] : res.summary.failures) {
      err << "runtime failure: estimator " << labels[e] << ", run " << run << " (seed "
          << scenario.seed + run << "), step " << failure.step << ": " << failure.message << "\n";
      failed = true;
    }
    log << labels[e] << ": " << res.summary.runs_completed << "/" << res.summary.runs_requested
        << " runs, steady eps " << format_double(res.summary.steady_eps_mean) << ", steady trace "
        << format_double(res.summary.steady_trace_mean) << " (" << res.summary.wall_seconds
        << " s)\n";
    summaries.push_back({labels[e], std::move(res.summary)});
  }
  {
    auto f = open_output(out_dir / "summary.csv");
    write_summary(f, summaries);
  }
  {
    auto f = open_output(out_dir / "steady_state.csv");
    write_steady_state(f, summaries);
  }
  return failed ? exit_runtime_failure : exit_ok;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const NoValidWeights& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const InvalidGraph& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << "\n";
    return exit_runtime_failure;
  }
}

}  // namespace detail

inline int cmd_run(const CommandOptions& opt, std::ostream& log = std::cout,
                   std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const Scenario s = detail::load_for_command(opt);
    return detail::execute(s, {s.estimator}, opt.out, log, err);
  });
}

inline int cmd_compare(const CommandOptions& opt, std::ostream& log = std::cout,
                       std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    if (opt.estimators.size() < 2)
      throw ConfigError("estimators", "compare needs at least two estimators");
    std::vector<EstimatorKind> kinds;
    for (const auto& name : opt.estimators) {
      auto k = parse_estimator(name);
      if (!k) throw ConfigError("estimators", "unknown estimator '" + name + "'");
      kinds.push_back(*k);
    }
    const Scenario s = detail::load_for_command(opt);
    return detail::execute(s, kinds, opt.out, log, err);
  });
}

/// Largest eigenvalue of the follower block of L (negative means the
/// followers converge for fixed leaders).
inline double follower_block_max_eigenvalue(const Simulation& sim) {
  const auto& g = sim.scenario().graph;
  std::vector<int> followers;
  for (int i = 0; i < g.num_nodes(); ++i)
    if (!g.is_leader(i)) followers.push_back(i);
  if (followers.empty()) return 0.0;
  const auto n = static_cast<Index>(followers.size());
  Eigen::MatrixXd block(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c)
      block(r, c) = sim.laplacian()(followers[static_cast<std::size_t>(r)],
                                    followers[static_cast<std::size_t>(c)]);
  return Eigen::EigenSolver<Eigen::MatrixXd>(block, false).eigenvalues().real().maxCoeff();
}

inline int cmd_validate(const CommandOptions& opt, std::ostream& log = std::cout,
                        std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const Scenario s = detail::load_for_command(opt);
    const Simulation sim(s);
    const auto& g = s.graph;
    const double residual = check_weights(g, sim.weights(), s.target,
                                          1e-9 * std::max(1.0, std::abs(s.weights.scale)));
    const double stability = follower_block_max_eigenvalue(sim);

    log << "N=" << g.num_nodes() << "\n";
    log << "links=" << g.links().size() << "\n";
    log << "M=" << sim.op().num_edges() << "\n";
    log << "D=" << s.dim() << "\n";
    log << "leaders=";
    for (std::size_t i = 0; i < g.leaders().size(); ++i) log << (i ? " " : "") << g.leaders()[i] + 1;
    log << "\n";
    log << "estimator=" << to_string(s.estimator) << "\n";
    log << "weights=" << (s.weights.mode == WeightMode::solve ? "solve" : "explicit") << "\n";
    log << "weight_residual=" << format_double(residual) << "\n";
    log << "follower_block_max_eigenvalue=" << format_double(stability) << "\n";
    log << "T=" << s.repeats << " dt=" << format_double(s.dt) << " horizon=" << s.horizon
        << " runs=" << s.runs << " seed=" << s.seed << "\n";

    if (static_cast<Index>(g.leaders().size()) != s.dim() + 1)
      err << "warning: " << g.leaders().size() << " leaders; a rigid formation needs D+1 = "
          << s.dim() + 1 << "\n";
    const bool has_followers = static_cast<int>(g.leaders().size()) < g.num_nodes();
    if (has_followers && !(stability < 0.0))
      err << "warning: follower block of the Laplacian is not Hurwitz; followers will not "
             "converge\n";
    return static_cast<int>(exit_ok);
  });
}

}  // namespace relform
