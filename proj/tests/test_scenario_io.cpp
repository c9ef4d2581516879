#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "relform/scenario_io.hpp"

using namespace relform;

namespace {

std::string where_of(const std::string& text, const std::vector<std::string>& ov = {}) {
  try {
    parse_scenario(text, ov);
  } catch (const ConfigError& e) {
    return e.where();
  }
  return "<no error>";
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return s.replace(pos, from.size(), to);
}

}  // namespace

TEST(ScenarioFile, ShippedScenarioLoads) {
  const Scenario s = fixtures::ten_agents();
  EXPECT_EQ(s.graph.num_nodes(), 10);
  EXPECT_EQ(s.graph.links().size(), 30u);
  EXPECT_EQ(s.graph.leaders(), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(s.dim(), 2);
  EXPECT_EQ(s.repeats, 10);
  EXPECT_EQ(s.runs, 50);
  EXPECT_DOUBLE_EQ(s.noise.sigma_w, 0.001);
  EXPECT_DOUBLE_EQ(s.noise.sigma_v, 0.1);
  EXPECT_DOUBLE_EQ(s.target(9, 0), 0.55);
  EXPECT_EQ(s.estimator, EstimatorKind::crkf);
  EXPECT_TRUE(s.paired);
}

TEST(ScenarioFile, WriteParseRoundTrip) {
  const Scenario a = fixtures::ten_agents({"sim.leader_distances=1-2:2.5 1-3:2 2-3:2.2",
                                           "filter.jitter=1e-9", "weights.scale=17.25"});
  const std::string text = scenario_text(a);
  const Scenario b = parse_scenario(text);
  EXPECT_EQ(scenario_text(b), text);
  EXPECT_EQ(a.target, b.target);
  EXPECT_EQ(a.init_cov, b.init_cov);
  ASSERT_TRUE(b.leader_distances.has_value());
  EXPECT_DOUBLE_EQ(b.leader_distances->at({2, 1}), 2.2);
}

TEST(ScenarioFile, ExplicitWeightsRoundTrip) {
  std::string text = fixtures::small_text;
  text = replace(text, "mode = solve\nscale = 5",
                 "mode = explicit\n1-2 = 0.5\n1-3 = 0.5\n2-3 = 1.0\n1-4 = -1\n2-4 = -0.5\n3-4 = -0.5");
  // These weights do not annihilate the target; parsing succeeds and the
  // simulation constructor refuses them.
  const Scenario s = parse_scenario(text);
  EXPECT_EQ(s.weights.mode, WeightMode::explicit_values);
  EXPECT_DOUBLE_EQ(s.weights.values.at(3, 0), -1.0);
  EXPECT_EQ(scenario_text(parse_scenario(scenario_text(s))), scenario_text(s));
  EXPECT_THROW(Simulation{s}, NoValidWeights);
}

TEST(ScenarioFile, UnknownKeysAndSectionsAreNamed) {
  const std::string base = fixtures::small_text;
  EXPECT_EQ(where_of(base + "\n[extra]\nfoo = 1\n"), "extra");
  EXPECT_EQ(where_of(replace(base, "seed = 11", "seed = 11\nsede = 3")), "sim.sede");
  EXPECT_EQ(where_of(replace(base, "[graph]\nnodes = 4", "[graph]\nnodes = 4\ncolour = red")),
            "graph.colour");
}

TEST(ScenarioFile, MissingPiecesAreNamed) {
  const std::string base = fixtures::small_text;
  EXPECT_EQ(where_of(replace(base, "[graph]", "[grph]")), "grph");
  const auto pos = base.find("[target]");
  EXPECT_EQ(where_of(base.substr(pos)), "graph");
  EXPECT_EQ(where_of(replace(base, "dt = 0.001\n", "")), "sim.dt");
  EXPECT_EQ(where_of(replace(base, "4 = 0.5 0.5\n", "")), "target.4");
  EXPECT_EQ(where_of(replace(base, "links = 1-2 1-3 2-3 1-4 2-4 3-4", "links = 1-2 1-3 1-4")),
            "graph");
}

TEST(ScenarioFile, BadValuesAreNamed) {
  const std::string base = fixtures::small_text;
  EXPECT_EQ(where_of(replace(base, "horizon = 200", "horizon = lots")), "sim.horizon");
  EXPECT_EQ(where_of(replace(base, "estimator = crkf", "estimator = ukf")), "filter.estimator");
  EXPECT_EQ(where_of(base, {"filter.P=1 2, 2 1"}), "filter.P");
  EXPECT_EQ(where_of(base, {"filter.mu=0 0 0"}), "filter.mu");
  EXPECT_EQ(where_of(base, {"sigma_v=-1"}), "noise.sigma_v");
  EXPECT_EQ(where_of(base, {"sim.pairing=maybe"}), "sim.pairing");
}

TEST(Overrides, DottedAndBareKeys) {
  const Scenario s = fixtures::small({"sim.runs=9", "horizon=50", "rho_w=0.25",
                                      "filter.covariance_form=joseph", "target.4=0.4 0.6"});
  EXPECT_EQ(s.runs, 9);
  EXPECT_EQ(s.horizon, 50);
  EXPECT_DOUBLE_EQ(s.noise.rho_w, 0.25);
  EXPECT_EQ(s.filter.form, CovarianceForm::joseph);
  EXPECT_DOUBLE_EQ(s.target(3, 1), 0.6);
  EXPECT_EQ(where_of(fixtures::small_text, {"nonsense=1"}), "nonsense");
  EXPECT_EQ(where_of(fixtures::small_text, {"runs"}), "runs");
  EXPECT_EQ(where_of(fixtures::small_text, {"plot.kind=x"}), "plot");
}

TEST(Overrides, CanAddMissingOptionalSection) {
  std::string text = fixtures::small_text;
  text = replace(text, "[weights]\nmode = solve\nscale = 5\n", "");
  const Scenario s = parse_scenario(text, {"weights.scale=4"});
  EXPECT_DOUBLE_EQ(s.weights.scale, 4.0);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, 0.0}) {
    const std::string s = format_double(v);
    EXPECT_EQ(std::stod(s), v) << s;
  }
  EXPECT_EQ(format_double(0.001), "0.001");
}

TEST(TraceFile, WriteReadRoundTrip) {
  const Simulation sim(fixtures::small({"sim.horizon=20"}));
  const SimTrace t = sim.run_once(EstimatorKind::jrkf, 4, {5, true, false});
  std::stringstream buf;
  write_trace_header(buf, sim.op());
  write_trace_rows(buf, 2, "jrkf", t);
  const TraceTable table = read_trace(buf);
  EXPECT_EQ(table.columns, trace_columns(sim.op()));
  EXPECT_EQ(table.columns[7], "xhat_1_2_0");
  EXPECT_EQ(table.columns.back(), "z_4_1");
  ASSERT_EQ(table.rows.size(), 4u);
  const TraceRow& row = table.rows[1];
  EXPECT_EQ(row.run, 2u);
  EXPECT_EQ(row.k, 5);
  EXPECT_EQ(row.estimator, "jrkf");
  EXPECT_EQ(row.values[0], t.eps[5]);
  EXPECT_EQ(row.values[4], t.snapshots[1].estimate(0));
  EXPECT_EQ(row.values.back(), t.snapshots[1].positions(7));
}

TEST(TraceFile, RejectsForeignHeader) {
  std::istringstream in("step,error\n1,2\n");
  EXPECT_THROW(read_trace(in), Error);
  std::istringstream empty("");
  EXPECT_THROW(read_trace(empty), Error);
}

TEST(SummaryFile, ColumnsPerLabel) {
  MonteCarloSummary s;
  s.eps_mean = {1.0, 0.5};
  s.eps_std = {0.1, 0.05};
  s.trace_mean = {2.0, 1.0};
  s.runs_requested = 4;
  s.runs_completed = 4;
  s.steady_start = 1;
  s.steady_eps_mean = 0.5;
  s.steady_trace_mean = 1.0;
  std::ostringstream out;
  write_summary(out, {{"rkf", s}, {"rkf_2", s}});
  EXPECT_EQ(out.str(),
            "k,eps_mean_rkf,eps_std_rkf,cov_trace_rkf,eps_mean_rkf_2,eps_std_rkf_2,cov_trace_rkf_2\n"
            "0,1,0.1,2,1,0.1,2\n"
            "1,0.5,0.05,1,0.5,0.05,1\n");
  std::ostringstream steady;
  write_steady_state(steady, {{"crkf", s}});
  EXPECT_EQ(steady.str(),
            "estimator,runs_requested,runs_completed,runs_failed,steady_start,steady_eps_mean,"
            "steady_cov_trace_mean\ncrkf,4,4,0,1,0.5,1\n");
}
