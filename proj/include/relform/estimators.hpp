#pragma once

// Relative-position estimators over the directed sensing edges:
//   - per-edge maximum-likelihood estimate (MLE),
//   - per-edge relative Kalman filter (RKF),
//   - centralized relative Kalman filter over all edges (CRKF),
//   - per-agent joint relative Kalman filter with block-diagonal gain (JRKF).
//
// All filters share the observation model y = (1_T ⊗ I_D) x + v with
// v ~ N(0, I_T ⊗ R_ij) per edge. That model is never materialized: the T
// repeats of an edge reduce to their mean with noise R_ij / T, which yields
// the same gain (K = G ⊗ 1_Tᵀ / T with G = Σ (Σ + R/T)⁻¹), posterior mean and
// posterior covariance as the stacked form.

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relform/errors.hpp"
#include "relform/graph.hpp"
#include "relform/models.hpp"

namespace relform {

enum class CovarianceForm { standard, joseph };

/// Prior used by the JRKF. `joint` is B_iᵀB_i ⊗ P; `edgewise` drops the
/// cross-edge blocks, leaving 2P per edge.
enum class JointPrior { joint, edgewise };

struct FilterOptions {
  CovarianceForm form = CovarianceForm::standard;
  /// Added as ε·I to every initial covariance.
  double jitter = 0.0;
  JointPrior jrkf_prior = JointPrior::joint;
};

enum class BeliefScope { edge, agent, global };

struct FilterBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  BeliefScope scope = BeliefScope::edge;
  /// Edge index for edge scope, agent index for agent scope, -1 for global.
  Index owner = -1;
};

// ---------------------------------------------------------------------------
// Observation helpers

/// Hᵀy / T for stacked edges: the mean of each edge's T blocks.
inline Eigen::VectorXd repeat_means(const Eigen::Ref<const Eigen::VectorXd>& y, Index repeats,
                                    Index dim) {
  if (repeats < 1 || dim < 1 || y.size() % (repeats * dim) != 0)
    throw DimensionMismatch("measurement length is not a multiple of T·D");
  const Index edges = y.size() / (repeats * dim);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(edges * dim);
  for (Index e = 0; e < edges; ++e) {
    auto acc = out.segment(e * dim, dim);
    for (Index t = 0; t < repeats; ++t) acc += y.segment((e * repeats + t) * dim, dim);
    acc /= static_cast<double>(repeats);
  }
  return out;
}

/// Closed-form MLE of one edge from T readings: (HᵀR̄⁻¹H)⁻¹HᵀR̄⁻¹y = Hᵀy / T.
inline Eigen::VectorXd mle_edge(const Eigen::Ref<const Eigen::VectorXd>& y, Index repeats) {
  if (repeats < 1 || y.size() % repeats != 0)
    throw DimensionMismatch("measurement length is not a multiple of T");
  return repeat_means(y, repeats, y.size() / repeats);
}

namespace detail {

inline const Eigen::MatrixXd& noise_block(std::span<const Eigen::MatrixXd> noise, Index e) {
  return noise.size() == 1 ? noise[0] : noise[static_cast<std::size_t>(e)];
}

inline void symmetrize(Eigen::MatrixXd& m) {
  const Eigen::MatrixXd t = m.transpose();
  m = 0.5 * (m + t);
}

/// Innovation covariance Σ + bdiag(R_e / T) and its Cholesky factor.
inline Eigen::LLT<Eigen::MatrixXd> factor_innovation(const Eigen::MatrixXd& prior_cov,
                                                     Index repeats,
                                                     std::span<const Eigen::MatrixXd> noise,
                                                     Index dim) {
  const Index edges = prior_cov.rows() / dim;
  if (noise.size() != 1 && static_cast<Index>(noise.size()) != edges)
    throw DimensionMismatch("one measurement covariance per edge expected");
  Eigen::MatrixXd s = prior_cov;
  for (Index e = 0; e < edges; ++e)
    s.block(e * dim, e * dim, dim, dim) += noise_block(noise, e) / static_cast<double>(repeats);
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw SingularInnovation("innovation covariance is not positive definite");
  return llt;
}

inline FilterBelief kalman_update(const FilterBelief& prior,
                                  const Eigen::Ref<const Eigen::VectorXd>& y, Index repeats,
                                  std::span<const Eigen::MatrixXd> noise,
                                  const FilterOptions& options) {
  if (noise.empty()) throw DimensionMismatch("missing measurement covariance");
  const Index dim = noise[0].rows();
  const Index n = prior.mean.size();
  if (prior.cov.rows() != n || prior.cov.cols() != n || n % dim != 0)
    throw DimensionMismatch("belief dimensions inconsistent");
  if (y.size() != n * repeats) throw DimensionMismatch("measurement length does not match belief");

  FilterBelief post = prior;
  if (n == 0) return post;
  const auto llt = factor_innovation(prior.cov, repeats, noise, dim);
  const Eigen::VectorXd innovation = repeat_means(y, repeats, dim) - prior.mean;
  post.mean = prior.mean + prior.cov * llt.solve(innovation);

  if (options.form == CovarianceForm::standard) {
    // (I - KH)Σ = Σ - Σ S⁻¹ Σ = Σ - WᵀW with W = L⁻¹Σ.
    const Eigen::MatrixXd w = llt.matrixL().solve(prior.cov);
    Eigen::MatrixXd lower = prior.cov;
    lower.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose(), -1.0);
    post.cov = lower.selfadjointView<Eigen::Lower>();
  } else {
    // (I - KH)Σ(I - KH)ᵀ + K R̄ Kᵀ with KH = G and K R̄ Kᵀ = G (R/T) Gᵀ.
    const Eigen::MatrixXd gain = llt.solve(prior.cov).transpose();
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
    for (Index e = 0; e < n / dim; ++e)
      r.block(e * dim, e * dim, dim, dim) = noise_block(noise, e) / static_cast<double>(repeats);
    const Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(n, n) - gain;
    post.cov = phi * prior.cov * phi.transpose() + gain * r * gain.transpose();
  }
  symmetrize(post.cov);
  return post;
}

/// Dense gain Σ Hᵀ (H Σ Hᵀ + R̄)⁻¹ for stacked edges, built from the reduced gain.
inline Eigen::MatrixXd expanded_gain(const Eigen::MatrixXd& prior_cov, Index repeats,
                                     std::span<const Eigen::MatrixXd> noise) {
  const Index dim = noise[0].rows();
  const Index n = prior_cov.rows();
  const auto llt = factor_innovation(prior_cov, repeats, noise, dim);
  const Eigen::MatrixXd reduced = llt.solve(prior_cov).transpose();
  Eigen::MatrixXd gain(n, n * repeats);
  for (Index e = 0; e < n / dim; ++e)
    for (Index t = 0; t < repeats; ++t)
      gain.middleCols((e * repeats + t) * dim, dim) =
          reduced.middleCols(e * dim, dim) / static_cast<double>(repeats);
  return gain;
}

inline Eigen::MatrixXd with_jitter(Eigen::MatrixXd cov, double jitter) {
  if (jitter != 0.0) cov.diagonal().array() += jitter;
  return cov;
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// RKF: one directed edge

inline FilterBelief rkf_init(const Eigen::MatrixXd& initial_cov, const FilterOptions& options = {},
                             Index edge = -1) {
  return {Eigen::VectorXd::Zero(initial_cov.rows()),
          detail::with_jitter(2.0 * initial_cov, options.jitter), BeliefScope::edge, edge};
}

/// ẑ += Δt(u_i - u_j); Σ += Q_ij.
inline FilterBelief rkf_predict(const FilterBelief& b, const Eigen::Ref<const Eigen::VectorXd>& u_i,
                                const Eigen::Ref<const Eigen::VectorXd>& u_j, double dt,
                                const Eigen::MatrixXd& edge_process_cov) {
  if (u_i.size() != b.mean.size() || u_j.size() != b.mean.size() ||
      edge_process_cov.rows() != b.mean.size())
    throw DimensionMismatch("rkf_predict: dimension mismatch");
  FilterBelief out = b;
  out.mean += dt * (u_i - u_j);
  out.cov += edge_process_cov;
  return out;
}

inline FilterBelief rkf_update(const FilterBelief& b, const Eigen::Ref<const Eigen::VectorXd>& y,
                               Index repeats, const Eigen::MatrixXd& edge_noise,
                               const FilterOptions& options = {}) {
  return detail::kalman_update(b, y, repeats, std::span(&edge_noise, 1), options);
}

/// K = Σ Hᵀ (H Σ Hᵀ + I_T ⊗ R_ij)⁻¹, D × TD.
inline Eigen::MatrixXd rkf_gain(const Eigen::MatrixXd& prior_cov, Index repeats,
                                const Eigen::MatrixXd& edge_noise) {
  return detail::expanded_gain(prior_cov, repeats, std::span(&edge_noise, 1));
}

/// Q_ij = B̄_ijᵀ Q B̄_ij for edge e.
inline Eigen::MatrixXd edge_process_covariance(const IncidenceOperator& op,
                                               const Eigen::MatrixXd& agent_process_cov, Index e) {
  return op.edge_covariance(agent_process_cov, {e});
}

// ---------------------------------------------------------------------------
// CRKF: all edges jointly

/// Mean 0, covariance BᵀB ⊗ P (positive semidefinite: translations are
/// unobservable in edge space).
inline FilterBelief crkf_init(const IncidenceOperator& op, const Eigen::MatrixXd& initial_cov,
                              const FilterOptions& options = {}) {
  if (initial_cov.rows() != op.dim()) throw DimensionMismatch("P must be D×D");
  const Eigen::MatrixXd btb = op.matrix().transpose() * op.matrix();
  return {Eigen::VectorXd::Zero(op.num_edges() * op.dim()),
          detail::with_jitter(detail::kron(btb, initial_cov), options.jitter), BeliefScope::global,
          -1};
}

/// x̂ += Δt B̄ᵀu; Σ += B̄ᵀ Q B̄ (edge-space process covariance given directly).
inline FilterBelief crkf_predict(const FilterBelief& b, const ControlInput& u, double dt,
                                 const Eigen::MatrixXd& edge_process_cov,
                                 const IncidenceOperator& op) {
  if (edge_process_cov.rows() != b.mean.size())
    throw DimensionMismatch("crkf_predict: edge process covariance has wrong size");
  FilterBelief out = b;
  out.mean += dt * op.edge_state(stacked(u));
  out.cov += edge_process_cov;
  return out;
}

/// As above, with Q given over the N·D agent space.
inline FilterBelief crkf_predict_agent_noise(const FilterBelief& b, const ControlInput& u,
                                             double dt, const Eigen::MatrixXd& agent_process_cov,
                                             const IncidenceOperator& op) {
  return crkf_predict(b, u, dt, op.edge_covariance(agent_process_cov), op);
}

inline FilterBelief crkf_update(const FilterBelief& b, const MeasurementBatch& y,
                                const Eigen::MatrixXd& edge_noise,
                                const FilterOptions& options = {}) {
  return detail::kalman_update(b, y.values, y.repeats, std::span(&edge_noise, 1), options);
}

inline FilterBelief crkf_update(const FilterBelief& b, const MeasurementBatch& y,
                                const std::vector<Eigen::MatrixXd>& edge_noise,
                                const FilterOptions& options = {}) {
  return detail::kalman_update(b, y.values, y.repeats, edge_noise, options);
}

// ---------------------------------------------------------------------------
// JRKF: one belief per agent over its incoming edges

/// Locally optimal block gain K_i = Σ_i H_iᵀ (H_i Σ_i H_iᵀ + R_i)⁻¹ with
/// H_i = I_{M_i} ⊗ 1_T ⊗ I_D and R_i = bdiag(I_T ⊗ R_ij). Returns M_iD × M_iTD.
inline Eigen::MatrixXd jrkf_local_gain(const Eigen::MatrixXd& prior_cov, Index repeats,
                                       const std::vector<Eigen::MatrixXd>& edge_noise) {
  return detail::expanded_gain(prior_cov, repeats, edge_noise);
}

inline Eigen::MatrixXd jrkf_local_gain(const Eigen::MatrixXd& prior_cov, Index repeats,
                                       const Eigen::MatrixXd& edge_noise) {
  return detail::expanded_gain(prior_cov, repeats, std::span(&edge_noise, 1));
}

inline FilterBelief jrkf_init_agent(const IncidenceOperator& op, int agent,
                                    const Eigen::MatrixXd& initial_cov,
                                    const FilterOptions& options = {}) {
  const Eigen::MatrixXd bi = node_submatrix(op, agent);
  Eigen::MatrixXd btb = bi.transpose() * bi;
  if (options.jrkf_prior == JointPrior::edgewise)
    btb = Eigen::MatrixXd(btb.diagonal().asDiagonal());
  return {Eigen::VectorXd::Zero(bi.cols() * op.dim()),
          detail::with_jitter(detail::kron(btb, initial_cov), options.jitter), BeliefScope::agent,
          agent};
}

inline std::vector<FilterBelief> jrkf_init(const IncidenceOperator& op,
                                           const Eigen::MatrixXd& initial_cov,
                                           const FilterOptions& options = {}) {
  if (initial_cov.rows() != op.dim()) throw DimensionMismatch("P must be D×D");
  std::vector<FilterBelief> beliefs;
  beliefs.reserve(static_cast<std::size_t>(op.num_nodes()));
  for (int i = 0; i < op.num_nodes(); ++i)
    beliefs.push_back(jrkf_init_agent(op, i, initial_cov, options));
  return beliefs;
}

/// B̄_iᵀ Q B̄_i; touches only the Q blocks of agent i and its neighbours.
inline Eigen::MatrixXd jrkf_process_covariance(const IncidenceOperator& op, int agent,
                                               const Eigen::MatrixXd& agent_process_cov) {
  return op.edge_covariance(agent_process_cov, op.incoming(agent));
}

/// x̂_i += Δt B̄_iᵀ u (reads u_i and u_j for j ∈ N_i only); Σ_i += local Q.
inline FilterBelief jrkf_predict(const FilterBelief& b, const IncidenceOperator& op,
                                 const ControlInput& u, double dt,
                                 const Eigen::MatrixXd& local_process_cov) {
  const int agent = static_cast<int>(b.owner);
  const Index dim = op.dim();
  FilterBelief out = b;
  const auto& edges = op.incoming(agent);
  for (std::size_t s = 0; s < edges.size(); ++s) {
    const auto [h, t] = op.edge(edges[s]);
    out.mean.segment(static_cast<Index>(s) * dim, dim) += dt * (u.row(h) - u.row(t)).transpose();
  }
  out.cov += local_process_cov;
  return out;
}

/// Rows of the global batch belonging to agent i's incoming edges.
inline Eigen::VectorXd agent_measurements(const IncidenceOperator& op, int agent,
                                          const MeasurementBatch& y) {
  const auto& edges = op.incoming(agent);
  Eigen::VectorXd out(static_cast<Index>(edges.size()) * y.edge_length());
  for (std::size_t s = 0; s < edges.size(); ++s)
    out.segment(static_cast<Index>(s) * y.edge_length(), y.edge_length()) = y.edge(edges[s]);
  return out;
}

inline FilterBelief jrkf_update(const FilterBelief& b, const IncidenceOperator& op,
                                const MeasurementBatch& y, const Eigen::MatrixXd& edge_noise,
                                const FilterOptions& options = {}) {
  const Eigen::VectorXd local = agent_measurements(op, static_cast<int>(b.owner), y);
  return detail::kalman_update(b, local, y.repeats, std::span(&edge_noise, 1), options);
}

/// Model matrices shared by all agents (each agent reads only its slice).
struct JrkfModel {
  double dt = 0.0;
  Eigen::MatrixXd agent_process_cov;  // Q, (N·D)×(N·D)
  Eigen::MatrixXd edge_noise;         // R_ij, D×D
  FilterOptions options;
};

/// One predict (with u) + update (with y) cycle for every agent.
inline std::vector<FilterBelief> jrkf_step(const std::vector<FilterBelief>& beliefs,
                                           const IncidenceOperator& op, const ControlInput& u,
                                           const MeasurementBatch& y, const JrkfModel& model) {
  std::vector<FilterBelief> out;
  out.reserve(beliefs.size());
  for (const FilterBelief& b : beliefs) {
    const int i = static_cast<int>(b.owner);
    const FilterBelief predicted =
        jrkf_predict(b, op, u, model.dt, jrkf_process_covariance(op, i, model.agent_process_cov));
    out.push_back(jrkf_update(predicted, op, y, model.edge_noise, model.options));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runtime-selectable estimators for the closed loop

enum class EstimatorKind { mle, rkf, crkf, jrkf, oracle };

inline std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::mle: return "mle";
    case EstimatorKind::rkf: return "rkf";
    case EstimatorKind::crkf: return "crkf";
    case EstimatorKind::jrkf: return "jrkf";
    case EstimatorKind::oracle: return "oracle-true-state";
  }
  return "?";
}

inline std::optional<EstimatorKind> parse_estimator(std::string_view s) {
  if (s == "mle") return EstimatorKind::mle;
  if (s == "rkf") return EstimatorKind::rkf;
  if (s == "crkf") return EstimatorKind::crkf;
  if (s == "jrkf") return EstimatorKind::jrkf;
  if (s == "oracle-true-state" || s == "oracle") return EstimatorKind::oracle;
  return std::nullopt;
}

/// Symmetry and eigenvalue-floor bookkeeping over posterior covariances.
/// The floor test is a Cholesky factorization of Σ + 1e-10·I, which succeeds
/// exactly when the minimum eigenvalue exceeds -1e-10.
struct CovarianceAudit {
  static constexpr double floor = -1e-10;

  std::size_t checked = 0;
  std::size_t asymmetric = 0;
  std::size_t below_floor = 0;
  double worst_eigenvalue = std::numeric_limits<double>::infinity();

  void observe(const Eigen::MatrixXd& cov) {
    if (cov.size() == 0) return;
    ++checked;
    if (cov != cov.transpose()) ++asymmetric;
    Eigen::MatrixXd shifted = cov;
    shifted.diagonal().array() -= floor;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success) {
      ++below_floor;
      const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov, Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .minCoeff();
      worst_eigenvalue = std::min(worst_eigenvalue, lo);
    }
  }

  void merge(const CovarianceAudit& o) {
    checked += o.checked;
    asymmetric += o.asymmetric;
    below_floor += o.below_floor;
    worst_eigenvalue = std::min(worst_eigenvalue, o.worst_eigenvalue);
  }

  bool clean() const { return asymmetric == 0 && below_floor == 0; }
};

/// Everything an estimator needs to know about the plant.
struct EstimationModel {
  const IncidenceOperator* op = nullptr;
  Index repeats = 1;
  double dt = 0.0;
  Eigen::MatrixXd agent_process_cov;  // Q
  Eigen::MatrixXd edge_noise;         // R_ij
  Eigen::MatrixXd initial_cov;        // P
  FilterOptions options;
  bool audit = false;
};

class Estimator {
 public:
  virtual ~Estimator() = default;

  /// Measurement update at step k. `true_edges` is read only by the oracle.
  virtual void update(const MeasurementBatch& y, const Eigen::VectorXd& true_edges) = 0;
  virtual void predict(const ControlInput& u) = 0;

  /// Stacked x̂_{k|k} in canonical edge order.
  virtual Eigen::VectorXd estimate() const = 0;
  /// Trace of the posterior covariance (summed over edges or agents).
  virtual double covariance_trace() const = 0;

  virtual EstimatorKind kind() const = 0;
  const CovarianceAudit& audit() const { return audit_; }

 protected:
  CovarianceAudit audit_;
};

class MleEstimator final : public Estimator {
 public:
  explicit MleEstimator(const EstimationModel& m)
      : m_(m), estimate_(Eigen::VectorXd::Zero(m.op->num_edges() * m.op->dim())) {
    trace_ = static_cast<double>(m.op->num_edges()) * m.edge_noise.trace() /
             static_cast<double>(m.repeats);
  }
  void update(const MeasurementBatch& y, const Eigen::VectorXd&) override {
    estimate_ = repeat_means(y.values, y.repeats, y.dim);
    if (m_.audit) audit_.observe(m_.edge_noise / static_cast<double>(m_.repeats));
  }
  void predict(const ControlInput&) override {}
  Eigen::VectorXd estimate() const override { return estimate_; }
  double covariance_trace() const override { return trace_; }
  EstimatorKind kind() const override { return EstimatorKind::mle; }

 private:
  EstimationModel m_;
  Eigen::VectorXd estimate_;
  double trace_ = 0.0;
};

class OracleEstimator final : public Estimator {
 public:
  explicit OracleEstimator(const EstimationModel& m)
      : estimate_(Eigen::VectorXd::Zero(m.op->num_edges() * m.op->dim())) {}
  void update(const MeasurementBatch&, const Eigen::VectorXd& true_edges) override {
    estimate_ = true_edges;
  }
  void predict(const ControlInput&) override {}
  Eigen::VectorXd estimate() const override { return estimate_; }
  double covariance_trace() const override { return 0.0; }
  EstimatorKind kind() const override { return EstimatorKind::oracle; }

 private:
  Eigen::VectorXd estimate_;
};

class RkfEstimator final : public Estimator {
 public:
  explicit RkfEstimator(const EstimationModel& m) : m_(m) {
    const Index edges = m.op->num_edges();
    for (Index e = 0; e < edges; ++e) {
      beliefs_.push_back(rkf_init(m.initial_cov, m.options, e));
      process_.push_back(edge_process_covariance(*m.op, m.agent_process_cov, e));
    }
  }
  void update(const MeasurementBatch& y, const Eigen::VectorXd&) override {
    for (auto& b : beliefs_) {
      b = rkf_update(b, y.edge(b.owner), y.repeats, m_.edge_noise, m_.options);
      if (m_.audit) audit_.observe(b.cov);
    }
  }
  void predict(const ControlInput& u) override {
    for (auto& b : beliefs_) {
      const auto [h, t] = m_.op->edge(b.owner);
      b = rkf_predict(b, u.row(h).transpose(), u.row(t).transpose(), m_.dt,
                      process_[static_cast<std::size_t>(b.owner)]);
    }
  }
  Eigen::VectorXd estimate() const override {
    const Index dim = m_.op->dim();
    Eigen::VectorXd x(m_.op->num_edges() * dim);
    for (const auto& b : beliefs_) x.segment(b.owner * dim, dim) = b.mean;
    return x;
  }
  double covariance_trace() const override {
    double t = 0.0;
    for (const auto& b : beliefs_) t += b.cov.trace();
    return t;
  }
  EstimatorKind kind() const override { return EstimatorKind::rkf; }
  const std::vector<FilterBelief>& beliefs() const { return beliefs_; }

 private:
  EstimationModel m_;
  std::vector<FilterBelief> beliefs_;
  std::vector<Eigen::MatrixXd> process_;
};

class CrkfEstimator final : public Estimator {
 public:
  explicit CrkfEstimator(const EstimationModel& m)
      : m_(m),
        belief_(crkf_init(*m.op, m.initial_cov, m.options)),
        process_(m.op->edge_covariance(m.agent_process_cov)) {}
  void update(const MeasurementBatch& y, const Eigen::VectorXd&) override {
    belief_ = crkf_update(belief_, y, m_.edge_noise, m_.options);
    if (m_.audit) audit_.observe(belief_.cov);
  }
  void predict(const ControlInput& u) override {
    belief_ = crkf_predict(belief_, u, m_.dt, process_, *m_.op);
  }
  Eigen::VectorXd estimate() const override { return belief_.mean; }
  double covariance_trace() const override { return belief_.cov.trace(); }
  EstimatorKind kind() const override { return EstimatorKind::crkf; }
  const FilterBelief& belief() const { return belief_; }

 private:
  EstimationModel m_;
  FilterBelief belief_;
  Eigen::MatrixXd process_;
};

class JrkfEstimator final : public Estimator {
 public:
  explicit JrkfEstimator(const EstimationModel& m)
      : m_(m), beliefs_(jrkf_init(*m.op, m.initial_cov, m.options)) {
    for (int i = 0; i < m.op->num_nodes(); ++i)
      process_.push_back(jrkf_process_covariance(*m.op, i, m.agent_process_cov));
  }
  void update(const MeasurementBatch& y, const Eigen::VectorXd&) override {
    for (auto& b : beliefs_) {
      b = jrkf_update(b, *m_.op, y, m_.edge_noise, m_.options);
      if (m_.audit) audit_.observe(b.cov);
    }
  }
  void predict(const ControlInput& u) override {
    for (auto& b : beliefs_)
      b = jrkf_predict(b, *m_.op, u, m_.dt, process_[static_cast<std::size_t>(b.owner)]);
  }
  Eigen::VectorXd estimate() const override {
    const Index dim = m_.op->dim();
    Eigen::VectorXd x(m_.op->num_edges() * dim);
    for (const auto& b : beliefs_) {
      const auto& edges = m_.op->incoming(static_cast<int>(b.owner));
      for (std::size_t s = 0; s < edges.size(); ++s)
        x.segment(edges[s] * dim, dim) = b.mean.segment(static_cast<Index>(s) * dim, dim);
    }
    return x;
  }
  double covariance_trace() const override {
    double t = 0.0;
    for (const auto& b : beliefs_) t += b.cov.trace();
    return t;
  }
  EstimatorKind kind() const override { return EstimatorKind::jrkf; }
  const std::vector<FilterBelief>& beliefs() const { return beliefs_; }

 private:
  EstimationModel m_;
  std::vector<FilterBelief> beliefs_;
  std::vector<Eigen::MatrixXd> process_;
};

inline std::unique_ptr<Estimator> make_estimator(EstimatorKind kind, const EstimationModel& m) {
  if (m.op == nullptr) throw DimensionMismatch("estimation model has no incidence operator");
  switch (kind) {
    case EstimatorKind::mle: return std::make_unique<MleEstimator>(m);
    case EstimatorKind::rkf: return std::make_unique<RkfEstimator>(m);
    case EstimatorKind::crkf: return std::make_unique<CrkfEstimator>(m);
    case EstimatorKind::jrkf: return std::make_unique<JrkfEstimator>(m);
    case EstimatorKind::oracle: return std::make_unique<OracleEstimator>(m);
  }
  throw DimensionMismatch("unknown estimator kind");
}

}  // namespace relform
