#pragma once

// Independent reference computations for the test suites. Everything here is
// written densely and directly from the textbook definitions; none of it
// calls into the structured code paths under test.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out = MatrixXd::Zero(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index r = 0; r < b.rows(); ++r)
        for (Eigen::Index c = 0; c < b.cols(); ++c)
          out(i * b.rows() + r, j * b.cols() + c) = a(i, j) * b(r, c);
  return out;
}

/// H̄ = I_M ⊗ 1_T ⊗ I_D.
inline MatrixXd stacked_observation(int edges, int repeats, int dim) {
  return kron(MatrixXd::Identity(edges, edges),
              kron(MatrixXd::Ones(repeats, 1), MatrixXd::Identity(dim, dim)));
}

/// bdiag(I_T ⊗ R_e).
inline MatrixXd stacked_noise(const std::vector<MatrixXd>& per_edge, int repeats) {
  const auto d = per_edge.front().rows();
  const auto m = static_cast<Eigen::Index>(per_edge.size());
  MatrixXd out = MatrixXd::Zero(m * repeats * d, m * repeats * d);
  for (Eigen::Index e = 0; e < m; ++e)
    out.block(e * repeats * d, e * repeats * d, repeats * d, repeats * d) =
        kron(MatrixXd::Identity(repeats, repeats), per_edge[static_cast<std::size_t>(e)]);
  return out;
}

struct Posterior {
  VectorXd mean;
  MatrixXd cov;
  MatrixXd gain;
};

/// Textbook Kalman update with explicit inverses.
inline Posterior kalman(const VectorXd& mean, const MatrixXd& cov, const VectorXd& y,
                        const MatrixXd& h, const MatrixXd& r, bool joseph = false) {
  const MatrixXd s = h * cov * h.transpose() + r;
  const MatrixXd k = cov * h.transpose() * s.fullPivLu().inverse();
  const MatrixXd phi = MatrixXd::Identity(cov.rows(), cov.cols()) - k * h;
  Posterior p;
  p.gain = k;
  p.mean = mean + k * (y - h * mean);
  p.cov = joseph ? MatrixXd(phi * cov * phi.transpose() + k * r * k.transpose())
                 : MatrixXd(phi * cov);
  return p;
}

/// Generalized least squares (HᵀR⁻¹H)⁻¹HᵀR⁻¹y.
inline VectorXd gls(const VectorXd& y, const MatrixXd& h, const MatrixXd& r) {
  const MatrixXd ri = r.fullPivLu().inverse();
  return (h.transpose() * ri * h).fullPivLu().solve(h.transpose() * ri * y);
}

/// tr[(I - KH)Σ(I - KH)ᵀ + K R Kᵀ].
inline double joseph_trace(const MatrixXd& k, const MatrixXd& cov, const MatrixXd& h,
                           const MatrixXd& r) {
  const MatrixXd phi = MatrixXd::Identity(cov.rows(), cov.cols()) - k * h;
  return (phi * cov * phi.transpose() + k * r * k.transpose()).trace();
}

/// Minimizer of joseph_trace over gains whose nonzero pattern is restricted
/// to the given (row range, column range) blocks. The objective is quadratic
/// in the free entries; its stationarity condition is
///   mask ⊙ (K S - Σ Hᵀ) = 0,  S = H Σ Hᵀ + R,
/// which is assembled as a dense linear system over the free entries.
struct GainBlock {
  Eigen::Index row0, rows, col0, cols;
};

inline MatrixXd constrained_min_trace_gain(const MatrixXd& cov, const MatrixXd& h,
                                           const MatrixXd& r,
                                           const std::vector<GainBlock>& blocks) {
  const MatrixXd s = h * cov * h.transpose() + r;
  const MatrixXd rhs_full = cov * h.transpose();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> free;
  for (const auto& b : blocks)
    for (Eigen::Index i = 0; i < b.rows; ++i)
      for (Eigen::Index j = 0; j < b.cols; ++j) free.emplace_back(b.row0 + i, b.col0 + j);
  const auto n = static_cast<Eigen::Index>(free.size());
  MatrixXd a = MatrixXd::Zero(n, n);
  VectorXd rhs(n);
  for (Eigen::Index eq = 0; eq < n; ++eq) {
    const auto [row, col] = free[static_cast<std::size_t>(eq)];
    rhs(eq) = rhs_full(row, col);
    for (Eigen::Index u = 0; u < n; ++u) {
      const auto [urow, ucol] = free[static_cast<std::size_t>(u)];
      if (urow == row) a(eq, u) = s(ucol, col);
    }
  }
  const VectorXd x = a.fullPivLu().solve(rhs);
  MatrixXd k = MatrixXd::Zero(h.cols(), h.rows());
  for (Eigen::Index u = 0; u < n; ++u) {
    const auto [row, col] = free[static_cast<std::size_t>(u)];
    k(row, col) = x(u);
  }
  return k;
}

/// Incidence matrix from (head, tail) pairs: +1 at the head, -1 at the tail.
inline MatrixXd incidence(const std::vector<std::pair<int, int>>& edges, int nodes) {
  MatrixXd b = MatrixXd::Zero(nodes, static_cast<Eigen::Index>(edges.size()));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    b(edges[e].first, static_cast<Eigen::Index>(e)) += 1.0;
    b(edges[e].second, static_cast<Eigen::Index>(e)) -= 1.0;
  }
  return b;
}

/// Projection of the all-ones stress onto the equilibrium null space, using
/// an LU kernel basis and normal equations instead of an SVD.
inline VectorXd projected_stress(const MatrixXd& target,
                                 const std::vector<std::pair<int, int>>& links) {
  const auto n = target.rows();
  const auto d = target.cols();
  const auto m = static_cast<Eigen::Index>(links.size());
  MatrixXd eq = MatrixXd::Zero(n * d, m);
  for (Eigen::Index e = 0; e < m; ++e) {
    const auto [a, b] = links[static_cast<std::size_t>(e)];
    for (Eigen::Index c = 0; c < d; ++c) {
      const double diff = target(a, c) - target(b, c);
      eq(a * d + c, e) += diff;
      eq(b * d + c, e) -= diff;
    }
  }
  Eigen::FullPivLU<MatrixXd> lu(eq);
  lu.setThreshold(1e-10);
  const MatrixXd basis = lu.kernel();
  if (basis.cols() == 0 || (basis.cols() == 1 && basis.isZero(0.0))) return VectorXd::Zero(m);
  const VectorXd coeff =
      (basis.transpose() * basis).ldlt().solve(basis.transpose() * VectorXd::Ones(m));
  return basis * coeff;
}

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
inline MatrixXd random_spd(Eigen::Index n, std::mt19937_64& rng, double lo = 0.2,
                           double hi = 3.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = g(rng);
  const Eigen::HouseholderQR<MatrixXd> qr(a);
  const MatrixXd q = qr.householderQ();
  VectorXd ev(n);
  for (Eigen::Index i = 0; i < n; ++i) ev(i) = u(rng);
  MatrixXd out = q * ev.asDiagonal() * q.transpose();
  return 0.5 * (out + out.transpose());
}

inline VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double sigma = 1.0) {
  std::normal_distribution<double> g(0.0, sigma);
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

using LinkSet = std::vector<std::pair<int, int>>;

inline bool is_connected(int n, const LinkSet& links) {
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  for (auto [a, b] : links) parent[static_cast<std::size_t>(find(a))] = find(b);
  for (int i = 1; i < n; ++i)
    if (find(i) != find(0)) return false;
  return true;
}

/// One representative per isomorphism class of connected simple graphs on
/// n labelled nodes, found by brute force over edge subsets and relabellings.
inline std::vector<LinkSet> connected_graphs(int n) {
  std::vector<std::pair<int, int>> all;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) all.emplace_back(a, b);
  std::set<std::vector<std::pair<int, int>>> seen;
  std::vector<LinkSet> out;
  const unsigned subsets = 1u << all.size();
  for (unsigned mask = 1; mask < subsets; ++mask) {
    LinkSet links;
    for (std::size_t e = 0; e < all.size(); ++e)
      if (mask & (1u << e)) links.push_back(all[e]);
    if (!is_connected(n, links)) continue;
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::pair<int, int>> canonical;
    bool first = true;
    do {
      std::vector<std::pair<int, int>> relabelled;
      for (auto [a, b] : links) {
        const int pa = perm[static_cast<std::size_t>(a)];
        const int pb = perm[static_cast<std::size_t>(b)];
        relabelled.emplace_back(std::min(pa, pb), std::max(pa, pb));
      }
      std::sort(relabelled.begin(), relabelled.end());
      if (first || relabelled < canonical) canonical = relabelled;
      first = false;
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (seen.insert(canonical).second) out.push_back(links);
  }
  return out;
}

}  // namespace oracle
