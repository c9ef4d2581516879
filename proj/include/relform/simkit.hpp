#pragma once

// Closed-loop simulation and Monte Carlo harness.
//
// One tick k runs, in this order:
//   measure y_k from z_k  ->  estimator update (x̂_{k|k})  ->  record metrics
//   -> control u_k from x̂_{k|k}  ->  estimator predict  ->  truth step to z_{k+1}.
// The initial belief acts as the prior for the first update.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "relform/errors.hpp"
#include "relform/estimators.hpp"
#include "relform/graph.hpp"
#include "relform/models.hpp"
#include "relform/stochastics.hpp"

namespace relform {

enum class WeightMode { solve, explicit_values };

struct WeightSpec {
  WeightMode mode = WeightMode::solve;
  /// Multiplies solved weights; ignored for explicit weights.
  double scale = 1.0;
  EdgeWeights values;
};

struct NoiseParams {
  double sigma_w = 0.0;
  double rho_w = 0.5;
  double sigma_v = 0.0;
  double rho_v = 0.5;
};

struct Scenario {
  SensingGraph graph;
  Configuration target;
  WeightSpec weights;
  EstimatorKind estimator = EstimatorKind::crkf;
  FilterOptions filter;
  NoiseParams noise;
  Eigen::VectorXd init_mean;
  Eigen::MatrixXd init_cov;
  double dt = 1e-3;
  int horizon = 3000;
  int repeats = 10;
  double leader_gain = 1.0;
  std::optional<LeaderDistances> leader_distances;
  std::uint64_t seed = 1;
  int runs = 1;
  bool paired = true;
  int trace_stride = 1;
  /// Number of runs whose full traces are written; negative means all.
  int trace_runs = -1;
  /// Monte Carlo worker threads; 0 picks the hardware concurrency.
  int threads = 0;

  Index dim() const { return target.cols(); }
};

/// Dimensional and range checks; throws ConfigError naming the offending key.
inline void validate(const Scenario& s) {
  const int n = s.graph.num_nodes();
  if (s.target.rows() != n)
    throw ConfigError("target", "expected " + std::to_string(n) + " positions, got " +
                                    std::to_string(s.target.rows()));
  const Index d = s.dim();
  if (d < 1) throw ConfigError("target", "dimension must be at least 1");
  if (s.init_mean.size() != d)
    throw ConfigError("filter.mu", "length must equal the dimension " + std::to_string(d));
  if (s.init_cov.rows() != d || s.init_cov.cols() != d)
    throw ConfigError("filter.P", "must be " + std::to_string(d) + "x" + std::to_string(d));
  if (s.init_cov != s.init_cov.transpose()) throw ConfigError("filter.P", "must be symmetric");
  if (Eigen::LLT<Eigen::MatrixXd>(s.init_cov).info() != Eigen::Success)
    throw ConfigError("filter.P", "must be positive definite");
  if (!(s.filter.jitter >= 0.0)) throw ConfigError("filter.jitter", "must be non-negative");
  if (!(s.dt > 0.0)) throw ConfigError("sim.dt", "must be positive");
  if (s.horizon < 1) throw ConfigError("sim.horizon", "must be at least 1");
  if (s.runs < 1) throw ConfigError("sim.runs", "must be at least 1");
  if (s.repeats < 1) throw ConfigError("sim.T", "must be at least 1");
  if (s.trace_stride < 1) throw ConfigError("sim.trace_stride", "must be at least 1");
  auto check_noise = [](const char* key, double sigma, double rho) {
    if (!(sigma >= 0.0)) throw ConfigError(std::string("noise.") + key, "sigma must be >= 0");
    if (!(rho >= 0.0 && rho < 1.0))
      throw ConfigError(std::string("noise.") + key, "correlation must lie in [0, 1)");
  };
  check_noise("sigma_w", s.noise.sigma_w, s.noise.rho_w);
  check_noise("sigma_v", s.noise.sigma_v, s.noise.rho_v);
  if (s.weights.mode == WeightMode::explicit_values) {
    for (const Link& l : s.graph.links())
      if (!s.weights.values.contains(l.a, l.b) || !s.weights.values.contains(l.b, l.a))
        throw ConfigError("weights", "missing weight for link " + std::to_string(l.a + 1) + "-" +
                                         std::to_string(l.b + 1));
  }
  if (s.leader_distances)
    for (int i : s.graph.leaders())
      for (int j : s.graph.leaders())
        if (i != j && !s.leader_distances->count({i, j}))
          throw ConfigError("sim.leader_distances", "missing distance for leader pair " +
                                                        std::to_string(i + 1) + "-" +
                                                        std::to_string(j + 1));
}

struct FormationResidual {
  double affine = 0.0;
  double leader = 0.0;
};

/// affine = ‖(L ⊗ I_D) z‖₂; leader = max over leader pairs of |‖z_i - z_j‖ - d_ij|.
inline FormationResidual formation_residual(const Configuration& z,
                                            const Eigen::MatrixXd& laplacian,
                                            const std::vector<int>& leaders,
                                            const LeaderDistances& distances) {
  FormationResidual r;
  r.affine = affine_residual(laplacian, z);
  for (int i : leaders)
    for (int j : leaders)
      if (i < j)
        r.leader = std::max(r.leader, std::abs((z.row(i) - z.row(j)).norm() - distances.at({i, j})));
  return r;
}

inline FormationResidual formation_residual(const Configuration& z, const SensingGraph& graph,
                                            const EdgeWeights& weights,
                                            const LeaderDistances& distances) {
  return formation_residual(z, generalized_laplacian(graph, weights), graph.leaders(), distances);
}

/// First step of the steady-state window (the final 25% of the horizon).
inline Index steady_state_start(Index horizon) {
  return horizon - std::max<Index>(1, horizon / 4);
}

struct Snapshot {
  std::int64_t k = 0;
  Eigen::VectorXd truth;      // x_k
  Eigen::VectorXd estimate;   // x̂_{k|k}
  Eigen::VectorXd control;    // u_k, stacked
  Eigen::VectorXd positions;  // z_k, stacked
};

struct RunFailure {
  std::int64_t step = 0;
  std::string message;
};

struct SimTrace {
  std::uint64_t seed = 0;
  EstimatorKind estimator = EstimatorKind::crkf;
  std::vector<double> eps;
  std::vector<double> cov_trace;
  std::vector<double> affine_residual;
  std::vector<double> leader_residual;
  std::vector<Snapshot> snapshots;
  CovarianceAudit audit;
  double wall_seconds = 0.0;
  std::optional<RunFailure> failure;

  std::size_t steps() const { return eps.size(); }
};

struct RecordOptions {
  int stride = 1;
  bool snapshots = true;
  bool audit = false;
};

/// Prepared scenario: incidence operator, weights, noise factors and
/// controller are built once and shared read-only by every run.
class Simulation {
 public:
  explicit Simulation(Scenario scenario)
      : scenario_(validated(std::move(scenario))),
        op_(build_directed_edges(scenario_.graph), scenario_.graph.num_nodes(), scenario_.dim()) {
    const Index n = scenario_.graph.num_nodes();
    const Index d = scenario_.dim();
    if (scenario_.weights.mode == WeightMode::solve) {
      weights_ = stress_weights(scenario_.graph, scenario_.target, scenario_.weights.scale);
    } else {
      weights_ = scenario_.weights.values;
      check_weights(scenario_.graph, weights_, scenario_.target);
    }
    laplacian_ = generalized_laplacian(scenario_.graph, weights_);
    distances_ = scenario_.leader_distances
                     ? *scenario_.leader_distances
                     : leader_distances_from(scenario_.target, scenario_.graph.leaders());
    process_cov_ = build_covariance({n * d, scenario_.noise.sigma_w, scenario_.noise.rho_w});
    edge_noise_ = build_covariance({d, scenario_.noise.sigma_v, scenario_.noise.rho_v});
    process_sampler_ = GaussianSampler(process_cov_);
    edge_sampler_ = GaussianSampler(edge_noise_);
    init_sampler_ = GaussianSampler(scenario_.init_cov);
    controller_ = std::make_unique<FormationController>(
        scenario_.graph, op_, ControlLaw{weights_, distances_, scenario_.leader_gain});
  }

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const Scenario& scenario() const { return scenario_; }
  const IncidenceOperator& op() const { return op_; }
  const EdgeWeights& weights() const { return weights_; }
  const Eigen::MatrixXd& laplacian() const { return laplacian_; }
  const LeaderDistances& leader_distances() const { return distances_; }
  const Eigen::MatrixXd& process_cov() const { return process_cov_; }
  const Eigen::MatrixXd& edge_noise() const { return edge_noise_; }
  const FormationController& controller() const { return *controller_; }

  EstimationModel estimation_model(bool audit = false) const {
    return {&op_,  scenario_.repeats, scenario_.dt,     process_cov_, edge_noise_,
            scenario_.init_cov, scenario_.filter, audit};
  }

  SimTrace run_once(std::uint64_t seed, const RecordOptions& rec = {}) const {
    return run_once(scenario_.estimator, seed, rec);
  }

  SimTrace run_once(EstimatorKind kind, std::uint64_t seed, const RecordOptions& rec = {}) const {
    const auto start = std::chrono::steady_clock::now();
    const Index n = scenario_.graph.num_nodes();
    const Index d = scenario_.dim();
    const std::uint64_t sub =
        scenario_.paired ? 0 : static_cast<std::uint64_t>(kind) + 1;
    NoiseStream init_stream(seed, StreamId::initial_positions, sub);
    NoiseStream process_stream(seed, StreamId::process_noise, sub);
    NoiseStream measure_stream(seed, StreamId::measurement_noise, sub);

    SimTrace trace;
    trace.seed = seed;
    trace.estimator = kind;
    const auto horizon = static_cast<std::size_t>(scenario_.horizon);
    trace.eps.reserve(horizon);
    trace.cov_trace.reserve(horizon);
    trace.affine_residual.reserve(horizon);
    trace.leader_residual.reserve(horizon);

    SwarmState state{Configuration(n, d), 0};
    for (Index i = 0; i < n; ++i)
      state.positions.row(i) =
          (scenario_.init_mean + init_sampler_.sample(init_stream)).transpose();

    std::unique_ptr<Estimator> est;
    try {
      est = make_estimator(kind, estimation_model(rec.audit));
      for (std::int64_t k = 0; k < scenario_.horizon; ++k) {
        const MeasurementBatch y =
            measure_edges(state, op_, scenario_.repeats, edge_sampler_, measure_stream);
        const Eigen::VectorXd truth = op_.edge_state(stacked(state.positions));
        est->update(y, truth);
        const Eigen::VectorXd estimate = est->estimate();
        const double eps = (truth - estimate).norm();
        if (!std::isfinite(eps)) throw Error("estimate diverged (non-finite error)");
        const FormationResidual res =
            formation_residual(state.positions, laplacian_, scenario_.graph.leaders(), distances_);
        trace.eps.push_back(eps);
        trace.cov_trace.push_back(est->covariance_trace());
        trace.affine_residual.push_back(res.affine);
        trace.leader_residual.push_back(res.leader);

        const ControlInput u = controller_->controls(estimate);
        if (rec.snapshots && k % rec.stride == 0)
          trace.snapshots.push_back({k, truth, estimate, stacked(u), stacked(state.positions)});
        est->predict(u);
        state = step_truth(state, u, scenario_.dt, process_sampler_, process_stream);
      }
    } catch (const Error& e) {
      trace.failure = RunFailure{static_cast<std::int64_t>(trace.eps.size()), e.what()};
    }
    if (est) trace.audit = est->audit();
    trace.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return trace;
  }

 private:
  static Scenario validated(Scenario s) {
    validate(s);
    return s;
  }

  Scenario scenario_;
  IncidenceOperator op_;
  EdgeWeights weights_;
  Eigen::MatrixXd laplacian_;
  LeaderDistances distances_;
  Eigen::MatrixXd process_cov_;
  Eigen::MatrixXd edge_noise_;
  GaussianSampler process_sampler_;
  GaussianSampler edge_sampler_;
  GaussianSampler init_sampler_;
  std::unique_ptr<FormationController> controller_;
};

inline SimTrace run_once(const Scenario& scenario, std::uint64_t seed,
                         const RecordOptions& rec = {}) {
  return Simulation(scenario).run_once(seed, rec);
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct MonteCarloOptions {
  /// 0 picks the hardware concurrency.
  int threads = 0;
  /// Full traces are kept for runs [0, keep_traces).
  std::size_t keep_traces = 0;
  RecordOptions record{1, false, false};
};

struct MonteCarloSummary {
  EstimatorKind estimator = EstimatorKind::crkf;
  std::size_t runs_requested = 0;
  std::size_t runs_completed = 0;
  std::size_t runs_failed = 0;
  /// Per step, over completed runs.
  std::vector<double> eps_mean;
  std::vector<double> eps_std;
  std::vector<double> trace_mean;
  /// Per run (index r ↔ seed base + r); NaN for failed runs.
  std::vector<double> run_steady_eps;
  std::vector<double> run_steady_trace;
  Index steady_start = 0;
  double steady_eps_mean = 0.0;
  double steady_trace_mean = 0.0;
  std::vector<std::pair<std::size_t, RunFailure>> failures;
  CovarianceAudit audit;
  double wall_seconds = 0.0;
};

struct MonteCarloResult {
  MonteCarloSummary summary;
  /// (run index, trace) for the kept runs, in run order.
  std::vector<std::pair<std::size_t, SimTrace>> traces;
};

namespace detail {

inline double window_mean(const std::vector<double>& v, std::size_t from) {
  double s = 0.0;
  for (std::size_t k = from; k < v.size(); ++k) s += v[k];
  return s / static_cast<double>(v.size() - from);
}

}  // namespace detail

/// Runs seeds base+0 .. base+runs-1 for `kind`. Runs execute on a worker
/// pool; aggregation happens after the join, in run order, so results do not
/// depend on the thread count. Failed runs are excluded and counted.
inline MonteCarloResult run_monte_carlo(const Simulation& sim, EstimatorKind kind,
                                        const MonteCarloOptions& options = {}) {
  const auto start = std::chrono::steady_clock::now();
  const Scenario& sc = sim.scenario();
  const auto runs = static_cast<std::size_t>(sc.runs);
  const auto horizon = static_cast<std::size_t>(sc.horizon);

  std::vector<SimTrace> traces(runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < runs; r = next++) {
      RecordOptions rec = options.record;
      rec.snapshots = rec.snapshots || r < options.keep_traces;
      traces[r] = sim.run_once(kind, sc.seed + r, rec);
      if (r >= options.keep_traces) traces[r].snapshots.clear();
    }
  };
  int threads = options.threads > 0 ? options.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(runs, 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  MonteCarloResult result;
  MonteCarloSummary& s = result.summary;
  s.estimator = kind;
  s.runs_requested = runs;
  s.steady_start = steady_state_start(static_cast<Index>(horizon));
  s.eps_mean.assign(horizon, 0.0);
  s.eps_std.assign(horizon, 0.0);
  s.trace_mean.assign(horizon, 0.0);
  s.run_steady_eps.assign(runs, std::numeric_limits<double>::quiet_NaN());
  s.run_steady_trace.assign(runs, std::numeric_limits<double>::quiet_NaN());

  for (std::size_t r = 0; r < runs; ++r) {
    const SimTrace& t = traces[r];
    s.audit.merge(t.audit);
    if (t.failure) {
      ++s.runs_failed;
      s.failures.emplace_back(r, *t.failure);
      continue;
    }
    ++s.runs_completed;
    for (std::size_t k = 0; k < horizon; ++k) {
      s.eps_mean[k] += t.eps[k];
      s.trace_mean[k] += t.cov_trace[k];
    }
    const auto from = static_cast<std::size_t>(s.steady_start);
    s.run_steady_eps[r] = detail::window_mean(t.eps, from);
    s.run_steady_trace[r] = detail::window_mean(t.cov_trace, from);
  }
  const auto n = static_cast<double>(s.runs_completed);
  if (s.runs_completed > 0) {
    for (std::size_t k = 0; k < horizon; ++k) {
      s.eps_mean[k] /= n;
      s.trace_mean[k] /= n;
    }
    if (s.runs_completed > 1) {
      for (std::size_t r = 0; r < runs; ++r) {
        if (traces[r].failure) continue;
        for (std::size_t k = 0; k < horizon; ++k) {
          const double dev = traces[r].eps[k] - s.eps_mean[k];
          s.eps_std[k] += dev * dev;
        }
      }
      for (double& v : s.eps_std) v = std::sqrt(v / (n - 1.0));
    }
    const auto from = static_cast<std::size_t>(s.steady_start);
    s.steady_eps_mean = detail::window_mean(s.eps_mean, from);
    s.steady_trace_mean = detail::window_mean(s.trace_mean, from);
  }

  for (std::size_t r = 0; r < std::min(runs, options.keep_traces); ++r)
    result.traces.emplace_back(r, std::move(traces[r]));
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

inline MonteCarloResult run_monte_carlo(const Simulation& sim,
                                        const MonteCarloOptions& options = {}) {
  return run_monte_carlo(sim, sim.scenario().estimator, options);
}

}  // namespace relform
