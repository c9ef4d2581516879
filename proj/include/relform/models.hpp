#pragma once

// Ground-truth plant: single-integrator agents, the Laplacian follower law,
// the leader distance law and noisy relative-position measurements.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "relform/errors.hpp"
#include "relform/graph.hpp"
#include "relform/stochastics.hpp"

namespace relform {

struct SwarmState {
  Configuration positions;
  std::int64_t step = 0;
};

/// N×D matrix of agent velocities.
using ControlInput = Configuration;

/// T stacked readings per directed edge, edges in canonical order. Edge e
/// occupies entries [e·T·D, (e+1)·T·D), as T consecutive blocks of D.
struct MeasurementBatch {
  Index repeats = 1;
  Index dim = 1;
  Eigen::VectorXd values;

  Index num_edges() const { return values.size() / (repeats * dim); }
  Index edge_length() const { return repeats * dim; }
  auto edge(Index e) const { return values.segment(e * edge_length(), edge_length()); }
};

/// Estimated relative positions ẑ^{ij} held by agent i, keyed by neighbour j.
using NeighborEstimates = std::map<int, Eigen::VectorXd>;

/// Target inter-leader distances d_ij, stored for both orientations.
using LeaderDistances = std::map<std::pair<int, int>, double>;

inline LeaderDistances leader_distances_from(const Configuration& target,
                                             const std::vector<int>& leaders) {
  LeaderDistances out;
  for (int i : leaders)
    for (int j : leaders)
      if (i != j) out[{i, j}] = (target.row(i) - target.row(j)).norm();
  return out;
}

namespace detail {

inline const Eigen::VectorXd& estimate_for(const NeighborEstimates& est, int agent, int j) {
  auto it = est.find(j);
  if (it == est.end())
    throw MissingEstimate("agent " + std::to_string(agent + 1) + " has no estimate for neighbour " +
                          std::to_string(j + 1));
  return it->second;
}

}  // namespace detail

/// u_i = Σ_{j∈N_i} l_ij ẑ^{ij}.
inline Eigen::VectorXd follower_control(const SensingGraph& graph, int agent,
                                        const NeighborEstimates& estimates,
                                        const EdgeWeights& weights) {
  const auto& nbrs = graph.neighbors(agent);
  Eigen::VectorXd u;
  for (int j : nbrs) {
    const Eigen::VectorXd& z = detail::estimate_for(estimates, agent, j);
    if (u.size() == 0) u = Eigen::VectorXd::Zero(z.size());
    if (z.size() != u.size()) throw DimensionMismatch("estimates differ in dimension");
    u += weights.at(agent, j) * z;
  }
  return u;
}

/// Distance-preserving gradient law over the complete leader subgraph:
/// u_i = gain · Σ_{j leader, j≠i} (d_ij² - ‖ẑ^{ij}‖²) ẑ^{ij}.
inline Eigen::VectorXd leader_control(const SensingGraph& graph, int agent,
                                      const NeighborEstimates& estimates,
                                      const LeaderDistances& distances, double gain) {
  if (!graph.is_leader(agent))
    throw InvalidGraph("agent " + std::to_string(agent + 1) + " is not a leader");
  Eigen::VectorXd u;
  for (int j : graph.leaders()) {
    if (j == agent) continue;
    const Eigen::VectorXd& z = detail::estimate_for(estimates, agent, j);
    if (u.size() == 0) u = Eigen::VectorXd::Zero(z.size());
    const double d = distances.at({agent, j});
    u += gain * (d * d - z.squaredNorm()) * z;
  }
  return u;
}

/// Σ over leader pairs of (‖z_i - z_j‖² - d_ij²)²; the quantity the leader
/// law descends.
inline double leader_potential(const Configuration& z, const std::vector<int>& leaders,
                               const LeaderDistances& distances) {
  double v = 0.0;
  for (std::size_t p = 0; p < leaders.size(); ++p)
    for (std::size_t q = p + 1; q < leaders.size(); ++q) {
      const int i = leaders[p], j = leaders[q];
      const double d = distances.at({i, j});
      const double e = (z.row(i) - z.row(j)).squaredNorm() - d * d;
      v += e * e;
    }
  return v;
}

struct ControlLaw {
  EdgeWeights weights;
  LeaderDistances leader_distances;
  double leader_gain = 1.0;
};

/// Whole-swarm control evaluation from stacked edge estimates. Produces the
/// same rows as follower_control / leader_control per agent, with weights
/// pre-gathered in edge order.
class FormationController {
 public:
  FormationController(const SensingGraph& graph, const IncidenceOperator& op, ControlLaw law)
      : graph_(&graph), op_(&op), law_(std::move(law)) {
    edge_weight_.resize(op.num_edges());
    for (Index e = 0; e < op.num_edges(); ++e) {
      const auto [h, t] = op.edge(e);
      edge_weight_(e) = graph.is_leader(h) ? 0.0 : law_.weights.at(h, t);
    }
    for (int i : graph.leaders())
      for (int j : graph.leaders()) {
        if (i == j) continue;
        auto e = op.find(i, j);
        if (!e) throw MissingEstimate("leader edge missing from sensing edges");
        leader_edges_.push_back({*e, law_.leader_distances.at({i, j})});
      }
  }

  const ControlLaw& law() const { return law_; }

  ControlInput controls(const Eigen::Ref<const Eigen::VectorXd>& edge_estimates) const {
    const Index dim = op_->dim();
    if (edge_estimates.size() != op_->num_edges() * dim)
      throw DimensionMismatch("edge estimate vector has wrong length");
    ControlInput u = ControlInput::Zero(op_->num_nodes(), dim);
    for (Index e = 0; e < op_->num_edges(); ++e) {
      const int h = op_->edge(e).head;
      if (edge_weight_(e) != 0.0)
        u.row(h) += edge_weight_(e) * edge_estimates.segment(e * dim, dim).transpose();
    }
    for (const auto& [e, d] : leader_edges_) {
      const auto z = edge_estimates.segment(e * dim, dim);
      u.row(op_->edge(e).head) += law_.leader_gain * (d * d - z.squaredNorm()) * z.transpose();
    }
    return u;
  }

 private:
  const SensingGraph* graph_;
  const IncidenceOperator* op_;
  ControlLaw law_;
  Eigen::VectorXd edge_weight_;
  std::vector<std::pair<Index, double>> leader_edges_;
};

/// z_{k+1} = z_k + Δt·u_k + w_k with one joint draw w_k ~ N(0, Q) over N·D.
inline SwarmState step_truth(const SwarmState& state, const ControlInput& u, double dt,
                             const GaussianSampler& process_noise, NoiseStream& stream) {
  if (u.rows() != state.positions.rows() || u.cols() != state.positions.cols())
    throw DimensionMismatch("control input does not match swarm state");
  if (process_noise.dim() != 0 && process_noise.dim() != state.positions.size())
    throw DimensionMismatch("process covariance must be (N·D)×(N·D)");
  SwarmState next{state.positions + dt * u, state.step + 1};
  Eigen::Map<Eigen::VectorXd> z(next.positions.data(), next.positions.size());
  process_noise.add_sample(stream, z);
  return next;
}

inline SwarmState step_truth(const SwarmState& state, const ControlInput& u, double dt,
                             const Eigen::MatrixXd& process_cov, NoiseStream& stream) {
  return step_truth(state, u, dt, GaussianSampler(process_cov), stream);
}

/// y^{ij} = (1_T ⊗ I_D)(z_i - z_j) + v, v ~ N(0, I_T ⊗ R_ij), drawn
/// independently for every edge, repeat and time step.
inline MeasurementBatch measure_edges(const SwarmState& state, const IncidenceOperator& op,
                                      Index repeats, const GaussianSampler& edge_noise,
                                      NoiseStream& stream) {
  if (repeats < 1) throw DimensionMismatch("measurement repeat count must be at least 1");
  const Index dim = op.dim();
  if (edge_noise.dim() != 0 && edge_noise.dim() != dim)
    throw DimensionMismatch("edge measurement covariance must be D×D");
  const Eigen::VectorXd x = op.edge_state(stacked(state.positions));
  MeasurementBatch batch{repeats, dim, Eigen::VectorXd(op.num_edges() * repeats * dim)};
  for (Index e = 0; e < op.num_edges(); ++e)
    for (Index t = 0; t < repeats; ++t) {
      auto block = batch.values.segment((e * repeats + t) * dim, dim);
      block = x.segment(e * dim, dim);
      edge_noise.add_sample(stream, block);
    }
  return batch;
}

inline MeasurementBatch measure_edges(const SwarmState& state, const IncidenceOperator& op,
                                      Index repeats, const Eigen::MatrixXd& edge_cov,
                                      NoiseStream& stream) {
  return measure_edges(state, op, repeats, GaussianSampler(edge_cov), stream);
}

}  // namespace relform
