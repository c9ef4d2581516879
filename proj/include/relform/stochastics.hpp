#pragma once

// Structured noise covariances and seeded Gaussian sampling.

#include <Eigen/Dense>

#include <cstdint>
#include <random>

#include "relform/errors.hpp"

namespace relform {

/// Compound-symmetric covariance: sigma² on the diagonal, correlation·sigma²
/// everywhere else.
struct CovarianceSpec {
  Eigen::Index dim = 1;
  double sigma = 0.0;
  double correlation = 0.0;
};

inline Eigen::MatrixXd build_covariance(const CovarianceSpec& spec) {
  if (spec.dim <= 0) throw DimensionMismatch("covariance dimension must be positive");
  if (!(spec.correlation >= 0.0 && spec.correlation < 1.0))
    throw NotPositiveDefinite("correlation must lie in [0, 1)");
  if (!(spec.sigma >= 0.0)) throw NotPositiveDefinite("sigma must be non-negative");
  const double var = spec.sigma * spec.sigma;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(spec.dim, spec.dim, spec.correlation * var);
  cov.diagonal().setConstant(var);
  return cov;
}

/// Labels for the independent random streams of one simulation run.
enum class StreamId : std::uint64_t {
  initial_positions = 1,
  process_noise = 2,
  measurement_noise = 3,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Standard-normal stream keyed by (seed, stream id, substream).
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, StreamId id, std::uint64_t substream = 0)
      : engine_(detail::splitmix64(detail::splitmix64(
                    detail::splitmix64(seed) ^ static_cast<std::uint64_t>(id)) ^
                substream)) {}

  double standard_normal() {
    ++draws_;
    return normal_(engine_);
  }

  Eigen::VectorXd standard_normal(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = standard_normal();
    return v;
  }

  std::uint64_t draws() const { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uint64_t draws_ = 0;
};

/// Zero-mean Gaussian with a cached Cholesky factor. An all-zero covariance
/// is accepted and produces exact zeros without consuming draws.
class GaussianSampler {
 public:
  GaussianSampler() = default;

  explicit GaussianSampler(const Eigen::MatrixXd& cov) : dim_(cov.rows()) {
    if (cov.rows() != cov.cols()) throw DimensionMismatch("covariance must be square");
    if (cov.isZero(0.0)) {
      degenerate_ = true;
      return;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("Cholesky factorization of covariance failed");
    factor_ = llt.matrixL();
    degenerate_ = false;
  }

  Eigen::Index dim() const { return dim_; }
  bool degenerate() const { return degenerate_; }
  const Eigen::MatrixXd& factor() const { return factor_; }

  Eigen::VectorXd sample(NoiseStream& stream) const {
    if (degenerate_) return Eigen::VectorXd::Zero(dim_);
    return factor_.triangularView<Eigen::Lower>() * stream.standard_normal(dim_);
  }

  /// Adds one draw to `out` in place.
  template <typename Derived>
  void add_sample(NoiseStream& stream, Eigen::MatrixBase<Derived>& out) const {
    if (degenerate_) return;
    out += factor_.triangularView<Eigen::Lower>() * stream.standard_normal(dim_);
  }

 private:
  Eigen::Index dim_ = 0;
  bool degenerate_ = true;
  Eigen::MatrixXd factor_;
};

inline Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                       NoiseStream& stream) {
  if (cov.rows() != mean.size()) throw DimensionMismatch("mean and covariance disagree");
  return mean + GaussianSampler(cov).sample(stream);
}

}  // namespace relform
