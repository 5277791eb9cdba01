#include <vibound/models.hpp>
#include <vibound/oracles.hpp>
#include <vibound/psis.hpp>

#include "soundness.hpp"
#include "test_oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace vibound {
namespace {

const double kInfinity = std::numeric_limits<double>::infinity();

TEST(Wasserstein1d, Examples) {
  const auto n = Scalar1D::normal(0, 1);
  for (double p : {1.0, 2.0, 3.0}) {
    EXPECT_NEAR(wasserstein_1d(n, n, p), 0.0, 1e-12);
    EXPECT_NEAR(wasserstein_1d(n, Scalar1D::normal(1.3, 1), p), 1.3, 1e-7);
  }
  for (double sd : {0.3, 2.5}) EXPECT_NEAR(wasserstein_1d(n, Scalar1D::normal(0, sd), 2.0), std::abs(sd - 1.0), 1e-7);
  EXPECT_NEAR(wasserstein_1d(Scalar1D::normal(0.2, 0.7), Scalar1D::normal(-0.4, 1.6), 1.0),
              oracle::gaussian_w1_1d(0.2, 0.7, -0.4, 1.6), 1e-7);
  EXPECT_THROW(wasserstein_1d(n, n, 0.5), std::invalid_argument);
}

TEST(Wasserstein1d, HeavyTailsGiveInfinity) {
  const auto n = Scalar1D::normal(0, 1);
  EXPECT_EQ(wasserstein_1d(n, Scalar1D::student_t(0, 1, 1), 1.0), kInfinity);
  EXPECT_EQ(wasserstein_1d(n, Scalar1D::student_t(0, 1, 2), 2.0), kInfinity);
  EXPECT_TRUE(std::isfinite(wasserstein_1d(n, Scalar1D::student_t(0, 1, 3), 2.0)));
}

TEST(Wasserstein1d, ScalesWithDistributions) {
  const auto a = Scalar1D::weibull(1.5);
  const auto b = Scalar1D::student_t(0.5, 1.0, 6.0);
  for (double p : {1.0, 2.0}) {
    const double w = wasserstein_1d(a, b, p);
    for (double c : {0.1, 10.0}) EXPECT_NEAR(wasserstein_1d(a.scaled(c), b.scaled(c), p), c * w, 1e-6 * c * w);
  }
}

TEST(WassersteinGaussian, Examples) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd s = oracle::random_spd(3, rng);
  const Eigen::VectorXd m = oracle::random_vector(3, rng);
  EXPECT_NEAR(wasserstein_gaussian(m, s, m, s), 0.0, 1e-7);
  const Eigen::Vector2d l1(1.0, 4.0), l2(9.0, 0.25);
  const Eigen::Vector2d dm(0.5, -1.0);
  EXPECT_NEAR(wasserstein_gaussian(Eigen::Vector2d::Zero(), l1.asDiagonal().toDenseMatrix(), dm,
                                   l2.asDiagonal().toDenseMatrix()),
              std::sqrt((l1.cwiseSqrt() - l2.cwiseSqrt()).squaredNorm() + dm.squaredNorm()), 1e-12);
  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;
  EXPECT_THROW(wasserstein_gaussian(Eigen::Vector2d::Zero(), bad, Eigen::Vector2d::Zero(),
                                    Eigen::Matrix2d::Identity()),
               std::invalid_argument);
}

TEST(WassersteinGaussian, MatchesBuresOracle) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 30; ++rep) {
    const int d = 1 + rep % 5;
    const Eigen::MatrixXd s1 = oracle::random_spd(d, rng), s2 = oracle::random_spd(d, rng);
    const Eigen::VectorXd m1 = oracle::random_vector(d, rng), m2 = oracle::random_vector(d, rng);
    EXPECT_NEAR(wasserstein_gaussian(m1, s1, m2, s2), oracle::gaussian_w2(m1, s1, m2, s2), 1e-8);
  }
}

TEST(WassersteinGaussian, AgreesWithQuantileCoupling) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> sd(0.2, 3.0);
  for (int rep = 0; rep < 30; ++rep) {
    const double m1 = z(rng), m2 = z(rng), s1 = sd(rng), s2 = sd(rng);
    EXPECT_NEAR(wasserstein_gaussian(Eigen::VectorXd::Constant(1, m1), Eigen::MatrixXd::Constant(1, 1, s1 * s1),
                                     Eigen::VectorXd::Constant(1, m2), Eigen::MatrixXd::Constant(1, 1, s2 * s2)),
                wasserstein_1d(Scalar1D::normal(m1, s1), Scalar1D::normal(m2, s2), 2.0), 1e-6);
  }
}

TEST(GroundTruth, ClosedFormFields) {
  Eigen::Matrix2d cov;
  cov << 4.0, 1.0, 1.0, 2.0;
  const auto t = ground_truth_closed_form(Eigen::Vector2d(1, 2), cov);
  EXPECT_NEAR(t.std(0), 2.0, 1e-14);
  EXPECT_NEAR(t.std(1), std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(t.spectral_scale, std::sqrt(3.0 + std::sqrt(2.0)), 1e-12);
  EXPECT_EQ(t.method, GroundTruthMethod::ClosedForm);
}

TEST(Quadrature, ConjugateTwoDimensional) {
  const auto m = conjugate_gaussian(conjugate_fixture(2, 4));
  const auto t = quadrature_posterior_moments(m);
  EXPECT_LT((t.mean - m.exact->mean).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((t.cov - m.exact->cov).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(t.log_normalizer, m.exact->log_evidence, 1e-6);
  EXPECT_EQ(t.method, GroundTruthMethod::Quadrature);
  for (int i = 0; i < 2; ++i) {
    const double mad = std::sqrt(2.0 * m.exact->cov(i, i) / M_PI);
    EXPECT_NEAR(t.mad(i), mad, 1e-3 * mad);
  }
}

TEST(Quadrature, PriorOnlyRobustRegression) {
  RobustRegressionData empty;
  empty.X = Eigen::MatrixXd(0, 2);
  empty.y = Eigen::VectorXd(0);
  const auto t = quadrature_posterior_moments(robust_regression(empty));
  EXPECT_LT(t.mean.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((t.cov - 100.0 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-4);
}

// Brute-force midpoint rule on a wide fixed box around the mode.
Eigen::MatrixXd brute_force_cov(const TargetModel& target, const Eigen::Vector2d& centre, double half, int n) {
  const double h = 2.0 * half / n;
  std::vector<double> lp;
  std::vector<Eigen::Vector2d> points;
  lp.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d x = centre + Eigen::Vector2d(-half + (i + 0.5) * h, -half + (j + 0.5) * h);
      points.push_back(x);
      lp.push_back(target.log_density(x));
    }
  const double top = *std::max_element(lp.begin(), lp.end());
  double total = 0.0;
  Eigen::Vector2d first = Eigen::Vector2d::Zero();
  Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
  for (std::size_t k = 0; k < lp.size(); ++k) {
    const double w = std::exp(lp[k] - top);
    total += w;
    first += w * points[k];
    second += w * points[k] * points[k].transpose();
  }
  first /= total;
  return second / total - first * first.transpose();
}

TEST(Quadrature, RobustRegressionMatchesBruteForce) {
  const auto target = robust_regression(default_robust_regression_data());
  const auto t = quadrature_posterior_moments(target);
  const Eigen::MatrixXd cov = brute_force_cov(target, t.mean, 6.0, 600);
  EXPECT_LT((t.cov - cov).cwiseAbs().maxCoeff(), 1e-4);
  const double scale = std::sqrt(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov).eigenvalues().maxCoeff());
  EXPECT_NEAR(t.spectral_scale, scale, 1e-4);
}

TEST(ReferenceSampler, ConjugateTenDimensional) {
  const auto m = conjugate_gaussian(conjugate_fixture(10, 5));
  ReferenceSamplerConfig config;
  config.steps = 100000;
  config.burn_in = 10000;
  config.seed = 6;
  const auto t = reference_sampler(m, config);
  EXPECT_EQ(t.method, GroundTruthMethod::ReferenceMCMC);
  EXPECT_FALSE(t.acceptance_warning);
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(t.mean(i), m.exact->mean(i), 4.0 * t.mc_error(i)) << i;
}

TEST(ReferenceSampler, AgreesWithQuadrature) {
  const auto target = robust_regression(default_robust_regression_data());
  const auto q = quadrature_posterior_moments(target);
  ReferenceSamplerConfig config;
  config.steps = 100000;
  config.burn_in = 10000;
  config.seed = 7;
  config.init = q.mean;
  const auto s = reference_sampler(target, config);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(s.mean(i), q.mean(i), 4.0 * s.mc_error(i)) << i;
}

TEST(ReferenceSampler, EightSchoolsSeedsAgree) {
  const auto target = eight_schools_noncentered(eight_schools_data());
  ReferenceSamplerConfig config;
  config.steps = 60000;
  config.burn_in = 6000;
  config.seed = 8;
  const auto a = reference_sampler(target, config);
  config.seed = 9;
  const auto b = reference_sampler(target, config);
  EXPECT_NEAR(a.mean(0), b.mean(0), 4.0 * std::hypot(a.mc_error(0), b.mc_error(0)));
}

TEST(ReferenceSampler, RejectsInvalidConfig) {
  ReferenceSamplerConfig config;
  config.chains = 0;
  EXPECT_THROW(reference_sampler(model_by_name("conjugate"), config), std::invalid_argument);
}

TEST(ErrorMetrics, Examples) {
  std::mt19937_64 rng(10);
  const Eigen::MatrixXd cov = oracle::random_spd(3, rng);
  const Eigen::VectorXd mean = oracle::random_vector(3, rng);
  const auto truth = ground_truth_closed_form(mean, cov);
  const auto same = error_metrics(truth, Moments{mean, cov});
  EXPECT_NEAR(same.mean_error, 0.0, 1e-12);
  EXPECT_NEAR(same.std_error, 0.0, 1e-12);
  EXPECT_NEAR(same.cov_error, 0.0, 1e-7);
  EXPECT_FALSE(same.psis_mean_error.has_value());

  const auto shifted = error_metrics(ground_truth_closed_form(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1)),
                                     Moments{Eigen::VectorXd::Constant(1, 0.7), Eigen::MatrixXd::Ones(1, 1)});
  EXPECT_NEAR(shifted.mean_error, 0.7, 1e-14);
}

TEST(ErrorMetrics, FormulaAudit) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 1 + rep % 4;
    const Eigen::MatrixXd c1 = oracle::random_spd(d, rng), c2 = oracle::random_spd(d, rng), c3 = oracle::random_spd(d, rng);
    const Eigen::VectorXd m1 = oracle::random_vector(d, rng), m2 = oracle::random_vector(d, rng),
                          m3 = oracle::random_vector(d, rng);
    WeightedMoments psis;
    psis.mean = m3;
    psis.cov = c3;
    psis.std = c3.diagonal().cwiseSqrt();
    psis.mad = psis.std;
    const auto e = error_metrics(ground_truth_closed_form(m1, c1), Moments{m2, c2}, psis);
    auto spectral_root = [](const Eigen::MatrixXd& a) {
      return std::sqrt(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().cwiseAbs().maxCoeff());
    };
    EXPECT_NEAR(e.mean_error, (m1 - m2).norm(), 1e-12);
    EXPECT_NEAR(e.std_error, (c1.diagonal().cwiseSqrt() - c2.diagonal().cwiseSqrt()).norm(), 1e-12);
    EXPECT_NEAR(e.cov_error, spectral_root(c1 - c2), 1e-10);
    EXPECT_NEAR(*e.psis_mean_error, (m1 - m3).norm(), 1e-12);
    EXPECT_NEAR(*e.psis_std_error, (c1.diagonal().cwiseSqrt() - psis.std).norm(), 1e-12);
    EXPECT_NEAR(*e.psis_cov_error, spectral_root(c1 - c3), 1e-10);
  }
}

TEST(SummaryBounds, DifferencesRespectWasserstein) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto a = Scalar1D::normal(unif(rng) - 0.5, 0.5 + unif(rng));
    const auto b = rep % 2 == 0 ? Scalar1D::normal(unif(rng) - 0.5, 0.5 + unif(rng))
                                : Scalar1D::student_t(unif(rng) - 0.5, 0.5 + unif(rng), 4.5 + 20.0 * unif(rng));
    const double w1 = wasserstein_1d(a, b, 1.0);
    const double w2 = wasserstein_1d(a, b, 2.0);
    const double sa = std::sqrt(a.variance()), sb = std::sqrt(b.variance());
    EXPECT_LE(std::abs(a.mean() - b.mean()), w2 + 1e-7);
    EXPECT_LE(std::abs(sa - sb), w2 + 1e-7);
    EXPECT_LE(std::abs(a.central_absolute_moment(1.0) - b.central_absolute_moment(1.0)), 2.0 * w1 + 1e-7);
    EXPECT_LE(std::abs(a.variance() - b.variance()), 2.0 * std::min(sa, sb) * w2 + 2.0 * w2 * w2 + 1e-7);
    EXPECT_TRUE(soundness::summary_pair(a, b).all());
  }
}

}  // namespace
}  // namespace vibound
