#pragma once

// Sensing graph, canonical directed-edge ordering and incidence operators.
//
// Nodes are 0-based in the API. A bidirectional link {i,j} yields the two
// directed edges (i,j) and (j,i); edge (i,j) carries the relative position
// z_i - z_j of its head i with respect to its tail j. Canonical ordering
// groups edges by head node (node 0 first) and sorts each group by tail.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <utility>
#include <vector>

#include "relform/errors.hpp"

namespace relform {

using Index = Eigen::Index;

/// N×D configuration, one agent per row. Row-major storage means the raw
/// data is exactly the stacked vector z = [z_0; z_1; ...].
using Configuration =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const Eigen::VectorXd> stacked(const Configuration& c) {
  return {c.data(), c.size()};
}

inline Configuration unstack(const Eigen::Ref<const Eigen::VectorXd>& z, Index dim) {
  if (dim <= 0 || z.size() % dim != 0)
    throw DimensionMismatch("stacked vector length is not a multiple of the dimension");
  Configuration c(z.size() / dim, dim);
  Eigen::Map<Eigen::VectorXd>(c.data(), c.size()) = z;
  return c;
}

/// Unordered sensing link, stored with a < b.
struct Link {
  int a = 0;
  int b = 0;

  Link() = default;
  Link(int i, int j) : a(std::min(i, j)), b(std::max(i, j)) {}

  auto operator<=>(const Link&) const = default;
};

/// Ordered pair (head, tail): head measures its position relative to tail.
struct DirectedEdge {
  int head = 0;
  int tail = 0;

  auto operator<=>(const DirectedEdge&) const = default;
};

using DirectedEdgeList = std::vector<DirectedEdge>;

class SensingGraph {
 public:
  SensingGraph() = default;

  /// Validates: indices in range, no self-loops, no duplicate links,
  /// connected, and the leader subgraph complete.
  SensingGraph(int num_nodes, std::vector<Link> links, std::vector<int> leaders = {})
      : num_nodes_(num_nodes), links_(std::move(links)), leaders_(std::move(leaders)) {
    if (num_nodes_ <= 0) throw InvalidGraph("graph needs at least one node");
    for (const Link& l : links_) {
      if (l.a == l.b) throw InvalidGraph("self-loop at node " + std::to_string(l.a + 1));
      if (l.a < 0 || l.b >= num_nodes_)
        throw InvalidGraph("link endpoint out of range");
    }
    std::sort(links_.begin(), links_.end());
    if (std::adjacent_find(links_.begin(), links_.end()) != links_.end())
      throw InvalidGraph("duplicate link");

    neighbors_.assign(num_nodes_, {});
    for (const Link& l : links_) {
      neighbors_[l.a].push_back(l.b);
      neighbors_[l.b].push_back(l.a);
    }
    for (auto& n : neighbors_) std::sort(n.begin(), n.end());

    std::sort(leaders_.begin(), leaders_.end());
    if (std::adjacent_find(leaders_.begin(), leaders_.end()) != leaders_.end())
      throw InvalidGraph("duplicate leader");
    for (int l : leaders_)
      if (l < 0 || l >= num_nodes_) throw InvalidGraph("leader index out of range");
    for (std::size_t p = 0; p < leaders_.size(); ++p)
      for (std::size_t q = p + 1; q < leaders_.size(); ++q)
        if (!has_link(leaders_[p], leaders_[q]))
          throw InvalidGraph("leader subgraph is not complete: missing link " +
                             std::to_string(leaders_[p] + 1) + "-" +
                             std::to_string(leaders_[q] + 1));

    if (!connected()) throw InvalidGraph("sensing graph is not connected");
  }

  int num_nodes() const { return num_nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<int>& leaders() const { return leaders_; }
  const std::vector<int>& neighbors(int i) const { return neighbors_.at(i); }

  bool is_leader(int i) const {
    return std::binary_search(leaders_.begin(), leaders_.end(), i);
  }
  bool has_link(int i, int j) const {
    return std::binary_search(links_.begin(), links_.end(), Link(i, j));
  }

 private:
  bool connected() const {
    std::vector<char> seen(num_nodes_, 0);
    std::queue<int> open;
    open.push(0);
    seen[0] = 1;
    int count = 1;
    while (!open.empty()) {
      const int i = open.front();
      open.pop();
      for (int j : neighbors_[i])
        if (!seen[j]) {
          seen[j] = 1;
          ++count;
          open.push(j);
        }
    }
    return count == num_nodes_;
  }

  int num_nodes_ = 0;
  std::vector<Link> links_;
  std::vector<int> leaders_;
  std::vector<std::vector<int>> neighbors_;
};

/// Both orientations of every link, grouped by head node then sorted by tail.
inline DirectedEdgeList build_directed_edges(const SensingGraph& graph) {
  DirectedEdgeList edges;
  edges.reserve(2 * graph.links().size());
  for (int i = 0; i < graph.num_nodes(); ++i)
    for (int j : graph.neighbors(i)) edges.push_back({i, j});
  return edges;
}

/// Node-by-edge incidence matrix B together with its Kronecker lift
/// B̄ = B ⊗ I_D, applied in structured form.
class IncidenceOperator {
 public:
  IncidenceOperator(DirectedEdgeList edges, int num_nodes, Index dim)
      : edges_(std::move(edges)), num_nodes_(num_nodes), dim_(dim) {
    if (dim_ <= 0) throw DimensionMismatch("spatial dimension must be positive");
    incoming_.assign(num_nodes_, {});
    matrix_ = Eigen::MatrixXd::Zero(num_nodes_, static_cast<Index>(edges_.size()));
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto [h, t] = edges_[e];
      if (h < 0 || h >= num_nodes_ || t < 0 || t >= num_nodes_ || h == t)
        throw InvalidGraph("directed edge endpoint out of range");
      matrix_(h, static_cast<Index>(e)) = 1.0;
      matrix_(t, static_cast<Index>(e)) = -1.0;
      incoming_[h].push_back(static_cast<Index>(e));
    }
  }

  int num_nodes() const { return num_nodes_; }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }
  Index dim() const { return dim_; }
  const DirectedEdgeList& edges() const { return edges_; }
  const DirectedEdge& edge(Index e) const { return edges_.at(static_cast<std::size_t>(e)); }

  /// N×M matrix with +1 at the head row and -1 at the tail row of each column.
  const Eigen::MatrixXd& matrix() const { return matrix_; }

  /// Dense B ⊗ I_D.
  Eigen::MatrixXd lifted() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(num_nodes_ * dim_, num_edges() * dim_);
    for (Index e = 0; e < num_edges(); ++e) {
      const auto [h, t] = edges_[static_cast<std::size_t>(e)];
      for (Index d = 0; d < dim_; ++d) {
        out(h * dim_ + d, e * dim_ + d) = 1.0;
        out(t * dim_ + d, e * dim_ + d) = -1.0;
      }
    }
    return out;
  }

  /// Indices of the edges whose head is node i, in canonical order.
  const std::vector<Index>& incoming(int i) const { return incoming_.at(i); }

  std::optional<Index> find(int head, int tail) const {
    for (Index e : incoming_.at(head))
      if (edges_[static_cast<std::size_t>(e)].tail == tail) return e;
    return std::nullopt;
  }

  /// B̄ᵀz: stacked relative positions z_head - z_tail in edge order.
  Eigen::VectorXd edge_state(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    check_node_vector(z);
    Eigen::VectorXd x(num_edges() * dim_);
    for (Index e = 0; e < num_edges(); ++e) {
      const auto [h, t] = edges_[static_cast<std::size_t>(e)];
      x.segment(e * dim_, dim_) = z.segment(h * dim_, dim_) - z.segment(t * dim_, dim_);
    }
    return x;
  }

  /// B̄_Sᵀz restricted to the edge subset S.
  Eigen::VectorXd edge_state(const Eigen::Ref<const Eigen::VectorXd>& z,
                             const std::vector<Index>& subset) const {
    check_node_vector(z);
    Eigen::VectorXd x(static_cast<Index>(subset.size()) * dim_);
    for (std::size_t s = 0; s < subset.size(); ++s) {
      const auto [h, t] = edge(subset[s]);
      x.segment(static_cast<Index>(s) * dim_, dim_) =
          z.segment(h * dim_, dim_) - z.segment(t * dim_, dim_);
    }
    return x;
  }

  /// B̄_Sᵀ Q B̄_S for an edge subset S. Reads only the D×D blocks of Q whose
  /// row and column agents are endpoints of edges in S.
  Eigen::MatrixXd edge_covariance(const Eigen::MatrixXd& agent_cov,
                                  const std::vector<Index>& subset) const {
    check_agent_matrix(agent_cov);
    const Index n = static_cast<Index>(subset.size());
    Eigen::MatrixXd out(n * dim_, n * dim_);
    auto block = [&](int r, int c) { return agent_cov.block(r * dim_, c * dim_, dim_, dim_); };
    for (Index p = 0; p < n; ++p) {
      const auto [hp, tp] = edge(subset[static_cast<std::size_t>(p)]);
      for (Index q = 0; q < n; ++q) {
        const auto [hq, tq] = edge(subset[static_cast<std::size_t>(q)]);
        out.block(p * dim_, q * dim_, dim_, dim_) =
            block(hp, hq) - block(hp, tq) - block(tp, hq) + block(tp, tq);
      }
    }
    return out;
  }

  /// B̄ᵀ Q B̄ over all edges.
  Eigen::MatrixXd edge_covariance(const Eigen::MatrixXd& agent_cov) const {
    return edge_covariance(agent_cov, all_edges());
  }

  std::vector<Index> all_edges() const {
    std::vector<Index> all(edges_.size());
    for (std::size_t e = 0; e < all.size(); ++e) all[e] = static_cast<Index>(e);
    return all;
  }

 private:
  void check_node_vector(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    if (z.size() != num_nodes_ * dim_)
      throw DimensionMismatch("stacked agent vector has wrong length");
  }
  void check_agent_matrix(const Eigen::MatrixXd& m) const {
    if (m.rows() != num_nodes_ * dim_ || m.cols() != num_nodes_ * dim_)
      throw DimensionMismatch("agent-space covariance must be (N·D)×(N·D)");
  }

  DirectedEdgeList edges_;
  int num_nodes_;
  Index dim_;
  Eigen::MatrixXd matrix_;
  std::vector<std::vector<Index>> incoming_;
};

inline IncidenceOperator incidence(const DirectedEdgeList& edges, int num_nodes, Index dim = 1) {
  return IncidenceOperator(edges, num_nodes, dim);
}

/// Columns of B for the edges directed towards node i (N×M_i).
inline Eigen::MatrixXd node_submatrix(const IncidenceOperator& op, int i) {
  const auto& cols = op.incoming(i);
  Eigen::MatrixXd out(op.num_nodes(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    out.col(static_cast<Index>(c)) = op.matrix().col(cols[c]);
  return out;
}

// ---------------------------------------------------------------------------
// Formation weights

/// Control weights l_ij keyed by directed edge (i,j).
class EdgeWeights {
 public:
  void set(int i, int j, double value) { values_[{i, j}] = value; }

  double at(int i, int j) const {
    auto it = values_.find({i, j});
    if (it == values_.end())
      throw MissingEstimate("no weight for edge " + std::to_string(i + 1) + "-" +
                            std::to_string(j + 1));
    return it->second;
  }
  bool contains(int i, int j) const { return values_.count({i, j}) != 0; }
  const std::map<std::pair<int, int>, double>& values() const { return values_; }

  EdgeWeights scaled(double factor) const {
    EdgeWeights out = *this;
    for (auto& [k, v] : out.values_) v *= factor;
    return out;
  }

 private:
  std::map<std::pair<int, int>, double> values_;
};

/// Generalized Laplacian: L_ij = -l_ij for neighbours, L_ii = Σ_j l_ij, so
/// that the stacked follower law reads u = (L ⊗ I_D) z.
inline Eigen::MatrixXd generalized_laplacian(const SensingGraph& graph, const EdgeWeights& w) {
  const int n = graph.num_nodes();
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j : graph.neighbors(i)) {
      const double l = w.at(i, j);
      lap(i, j) -= l;
      lap(i, i) += l;
    }
  return lap;
}

/// ‖(L ⊗ I_D) vec(z)‖ for an N×D configuration; with a row-major layout this
/// is the Frobenius norm of L·Z.
inline double affine_residual(const Eigen::MatrixXd& laplacian, const Configuration& z) {
  return (laplacian * z).norm();
}

/// Residual of a weight set against a target, relative to ‖target‖; throws
/// NoValidWeights above `tolerance`.
inline double check_weights(const SensingGraph& graph, const EdgeWeights& w,
                            const Configuration& target, double tolerance = 1e-9) {
  const double scale = std::max(target.norm(), 1e-300);
  const double residual = affine_residual(generalized_laplacian(graph, w), target) / scale;
  if (!(residual <= tolerance)) {
    std::ostringstream msg;
    msg << "weights do not annihilate the target configuration (relative residual "
        << residual << ")";
    throw NoValidWeights(msg.str(), residual);
  }
  return residual;
}

/// Symmetric weights from the equilibrium stresses of (graph, target).
///
/// Solves min ‖ω - 1‖ subject to Σ_j ω_ij (p_i - p_j) = 0 for every node,
/// i.e. projects the uniform stress onto the null space of the equilibrium
/// equations (computed by SVD), then sets l_ij = l_ji = -scale·ω_ij. When the
/// uniform stress is orthogonal to a non-trivial null space the dominant
/// null vector is used instead.
inline EdgeWeights stress_weights(const SensingGraph& graph, const Configuration& target,
                                  double scale = 1.0, double tolerance = 1e-9) {
  const int n = graph.num_nodes();
  const Index dim = target.cols();
  if (target.rows() != n) throw DimensionMismatch("target has wrong number of rows");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((target.row(i) - target.row(j)).norm() == 0.0)
        throw NoValidWeights("target positions " + std::to_string(i + 1) + " and " +
                                 std::to_string(j + 1) + " coincide",
                             0.0);

  const auto& links = graph.links();
  const Index m = static_cast<Index>(links.size());
  EdgeWeights out;
  if (m == 0) return out;

  Eigen::MatrixXd eq = Eigen::MatrixXd::Zero(n * dim, m);
  for (Index e = 0; e < m; ++e) {
    const auto [a, b] = links[static_cast<std::size_t>(e)];
    const Eigen::VectorXd diff = (target.row(a) - target.row(b)).transpose();
    eq.block(a * dim, e, dim, 1) += diff;
    eq.block(b * dim, e, dim, 1) -= diff;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(eq, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cutoff = tolerance * std::max(sv.size() ? sv(0) : 0.0, 1.0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  const Eigen::MatrixXd null_basis = svd.matrixV().rightCols(m - rank);

  Eigen::VectorXd omega = Eigen::VectorXd::Zero(m);
  if (null_basis.cols() > 0) {
    omega = null_basis * (null_basis.transpose() * Eigen::VectorXd::Ones(m));
    if (omega.norm() < 1e-12 * std::sqrt(static_cast<double>(m))) {
      omega = null_basis.col(0);
      if (omega.sum() < 0) omega = -omega;
    }
  }

  for (Index e = 0; e < m; ++e) {
    const auto [a, b] = links[static_cast<std::size_t>(e)];
    out.set(a, b, -scale * omega(e));
    out.set(b, a, -scale * omega(e));
  }
  check_weights(graph, out, target, tolerance * std::max(1.0, std::abs(scale)));
  return out;
}

}  // namespace relform
