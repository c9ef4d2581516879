#include <gtest/gtest.h>

#include <cmath>

#include "relform/stochastics.hpp"

using namespace relform;

TEST(BuildCovariance, CompoundSymmetry) {
  const Eigen::MatrixXd c = build_covariance({3, 0.5, 0.4});
  EXPECT_DOUBLE_EQ(c(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(c(1, 2), 0.1);
  EXPECT_TRUE(c.isApprox(c.transpose(), 0.0));
  // Eigenvalues are σ²(1-ρ) (twice) and σ²(1+2ρ).
  const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues();
  EXPECT_NEAR(ev(0), 0.25 * 0.6, 1e-15);
  EXPECT_NEAR(ev(2), 0.25 * 1.8, 1e-15);
}

TEST(BuildCovariance, RejectsOutOfRange) {
  EXPECT_THROW(build_covariance({2, 1.0, 1.0}), NotPositiveDefinite);
  EXPECT_THROW(build_covariance({2, 1.0, -0.1}), NotPositiveDefinite);
  EXPECT_THROW(build_covariance({2, -1.0, 0.0}), NotPositiveDefinite);
  EXPECT_TRUE(build_covariance({2, 0.0, 0.5}).isZero(0.0));
}

TEST(NoiseStream, SameKeySameSequence) {
  NoiseStream a(42, StreamId::process_noise);
  NoiseStream b(42, StreamId::process_noise);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.standard_normal(), b.standard_normal());
  EXPECT_EQ(a.draws(), 100u);
}

TEST(NoiseStream, StreamsAreDistinct) {
  NoiseStream a(42, StreamId::process_noise);
  NoiseStream b(42, StreamId::measurement_noise);
  NoiseStream c(43, StreamId::process_noise);
  NoiseStream d(42, StreamId::process_noise, 1);
  const double x = a.standard_normal();
  EXPECT_NE(x, b.standard_normal());
  EXPECT_NE(x, c.standard_normal());
  EXPECT_NE(x, d.standard_normal());
}

TEST(GaussianSampler, EmpiricalCovarianceMatches) {
  Eigen::Matrix3d cov;
  cov << 2.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 0.5;
  const GaussianSampler sampler(cov);
  NoiseStream s(5, StreamId::measurement_noise);
  const int n = 200000;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d second = Eigen::Matrix3d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d x = sampler.sample(s);
    mean += x;
    second += x * x.transpose();
  }
  mean /= n;
  second /= n;
  // Standard error of each entry is about sqrt(2·4/n) ≈ 0.0063.
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 0.02);
  EXPECT_LT((second - cov).cwiseAbs().maxCoeff(), 0.03);
}

TEST(GaussianSampler, ZeroCovarianceConsumesNothing) {
  const GaussianSampler sampler(Eigen::MatrixXd::Zero(4, 4));
  NoiseStream s(1, StreamId::process_noise);
  EXPECT_TRUE(sampler.sample(s).isZero(0.0));
  EXPECT_EQ(s.draws(), 0u);
  EXPECT_TRUE(sampler.degenerate());
}

TEST(GaussianSampler, IndefiniteCovarianceThrows) {
  Eigen::Matrix2d bad;
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(GaussianSampler{bad}, NotPositiveDefinite);
  EXPECT_THROW(GaussianSampler(Eigen::MatrixXd::Zero(2, 3)), DimensionMismatch);
}

TEST(SampleGaussian, AddsMean) {
  NoiseStream a(9, StreamId::initial_positions);
  NoiseStream b(9, StreamId::initial_positions);
  const Eigen::Vector2d mu(3.0, -1.0);
  const Eigen::Matrix2d p = Eigen::Matrix2d::Identity();
  const Eigen::VectorXd x = sample_gaussian(mu, p, a);
  EXPECT_TRUE((x - mu).isApprox(GaussianSampler(p).sample(b), 1e-14));
}
