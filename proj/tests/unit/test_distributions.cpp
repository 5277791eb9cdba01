#include <vibound/distributions.hpp>
#include <vibound/random.hpp>

#include "test_oracles.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace vibound {
namespace {

std::vector<Scalar1D> fixture_distributions() {
  return {Scalar1D::normal(0.3, 1.7),         Scalar1D::student_t(-1.0, 0.5, 3.0),
          Scalar1D::student_t(0.0, 1.0, 1.0), Scalar1D::weibull(0.5),
          Scalar1D::weibull(2.0, 3.0),        Scalar1D::half_cauchy(0.0, 5.0),
          Scalar1D::generalized_pareto(0.0, 1.0, 0.5),
          Scalar1D::generalized_pareto(1.0, 2.0, -0.2)};
}

TEST(Scalar1D, LogDensityExamples) {
  EXPECT_NEAR(Scalar1D::student_t(0.0, 1.0, 1.0).log_density(0.0), -std::log(std::numbers::pi),
              1e-12);
  EXPECT_NEAR(Scalar1D::weibull(1.0).log_density(2.0), -2.0, 1e-12);
  EXPECT_NEAR(Scalar1D::normal(0.0, 1.0).log_density(1.0), -0.5 - 0.5 * std::log(2 * std::numbers::pi),
              1e-12);
}

TEST(Scalar1D, OutOfSupportIsNegativeInfinity) {
  EXPECT_EQ(Scalar1D::weibull(1.5).log_density(-0.1), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(Scalar1D::half_cauchy(1.0, 2.0).log_density(0.5),
            -std::numeric_limits<double>::infinity());
  EXPECT_EQ(Scalar1D::generalized_pareto(0.0, 1.0, -0.5).log_density(2.5),
            -std::numeric_limits<double>::infinity());
}

TEST(Scalar1D, InvalidParametersThrow) {
  EXPECT_THROW(Scalar1D::normal(0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(Scalar1D::student_t(0.0, 1.0, -1.0), std::invalid_argument);
  EXPECT_THROW(Scalar1D::weibull(0.0), std::invalid_argument);
  EXPECT_THROW(Scalar1D::normal(std::nan(""), 1.0), std::invalid_argument);
}

TEST(Scalar1D, DensitiesIntegrateToOne) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (const auto& d : fixture_distributions()) {
    const double lo = d.support_lower();
    const double hi = d.support_upper();
    auto f = [&](double x) { return std::exp(d.log_density(x)); };
    double total = 0.0;
    if (std::isfinite(lo) && std::isfinite(hi)) {
      total = integrator.integrate(f, lo, hi);
    } else if (std::isfinite(lo)) {
      total = integrator.integrate(f, lo, lo + 1.0) +
              integrator.integrate(f, lo + 1.0, std::numeric_limits<double>::infinity());
    } else {
      total = integrator.integrate(f, -std::numeric_limits<double>::infinity(),
                                   std::numeric_limits<double>::infinity());
    }
    EXPECT_NEAR(total, 1.0, 1e-6) << d.describe();
  }
}

TEST(Scalar1D, QuantileExamples) {
  for (double k : {0.3, 1.0, 2.5})
    for (double u : {0.01, 0.3, 0.9, 0.999})
      EXPECT_NEAR(Scalar1D::weibull(k).quantile(u), std::pow(-std::log1p(-u), 1.0 / k),
                  1e-10 * std::pow(-std::log1p(-u), 1.0 / k));
  EXPECT_NEAR(Scalar1D::normal(0.0, 1.0).quantile(0.5), 0.0, 1e-14);
  EXPECT_NEAR(Scalar1D::student_t(0.0, 1.0, 2.0).quantile(0.975), oracle::t2_quantile(0.975),
              1e-9);
  EXPECT_NEAR(Scalar1D::student_t(0.0, 1.0, 2.0).quantile(0.975), 4.30265, 1e-5);
  EXPECT_NEAR(Scalar1D::half_cauchy(0.0, 1.0).quantile(0.5), 1.0, 1e-10);
}

TEST(Scalar1D, QuantileRejectsOutsideUnitInterval) {
  const auto d = Scalar1D::normal(0.0, 1.0);
  EXPECT_THROW(d.quantile(0.0), std::domain_error);
  EXPECT_THROW(d.quantile(1.0), std::domain_error);
  EXPECT_THROW(d.quantile(-0.2), std::domain_error);
}

TEST(Scalar1D, SamplerMatchesQuantiles) {
  constexpr int T = 100000;
  for (const auto& d : fixture_distributions()) {
    Rng rng(11, 0);
    std::vector<double> xs(T);
    for (auto& x : xs) x = d.sample(rng);
    for (double u : {0.25, 0.5, 0.75}) {
      const double q = d.quantile(u);
      const double frac =
          static_cast<double>(std::count_if(xs.begin(), xs.end(), [q](double x) { return x <= q; })) / T;
      EXPECT_NEAR(frac, u, 3.0 * std::sqrt(u * (1 - u) / T)) << d.describe() << " u=" << u;
    }
  }
}

TEST(Scalar1D, ScaledDistributionRescalesQuantiles) {
  for (const auto& d : fixture_distributions())
    for (double c : {0.1, 10.0})
      EXPECT_NEAR(d.scaled(c).quantile(0.3), c * d.quantile(0.3), 1e-9 * std::abs(c * d.quantile(0.3)) + 1e-12);
}

VariationalDistribution full_rank_t_fixture() {
  Eigen::MatrixXd l(3, 3);
  l << 1.2, 0, 0, 0.4, 0.7, 0, -0.3, 0.2, 0.5;
  return VariationalDistribution::full_rank_t(Eigen::Vector3d(1.0, -2.0, 0.5), l, 9.0);
}

TEST(VariationalDistribution, LogDensityOfStandardBivariateNormal) {
  const auto q = VariationalDistribution::mean_field_gaussian(Eigen::Vector2d::Zero(),
                                                              Eigen::Vector2d::Ones());
  EXPECT_NEAR(q.log_density(Eigen::Vector2d::Zero()), -std::log(2 * std::numbers::pi), 1e-12);
}

TEST(VariationalDistribution, ProductFamiliesSumComponentDensities) {
  const Eigen::Vector3d loc(0.5, -1.0, 2.0);
  const Eigen::Vector3d scale(0.3, 1.5, 2.0);
  const Eigen::Vector3d x(0.1, 0.2, 4.0);
  const auto qt = VariationalDistribution::mean_field_t(loc, scale, 7.0);
  const auto qg = VariationalDistribution::mean_field_gaussian(loc, scale);
  double lt = 0.0;
  double lg = 0.0;
  for (int i = 0; i < 3; ++i) {
    lt += Scalar1D::student_t(loc(i), scale(i), 7.0).log_density(x(i));
    lg += Scalar1D::normal(loc(i), scale(i)).log_density(x(i));
  }
  EXPECT_NEAR(qt.log_density(x), lt, 1e-12);
  EXPECT_NEAR(qg.log_density(x), lg, 1e-12);
}

TEST(VariationalDistribution, FullRankGaussianMatchesDenseFormula) {
  Eigen::MatrixXd l(2, 2);
  l << 2, 0, 1, 1;
  const Eigen::Vector2d mu(1.0, -1.0);
  const auto q = VariationalDistribution::full_rank_gaussian(mu, l);
  const Eigen::MatrixXd cov = l * l.transpose();
  const Eigen::Vector2d x(0.3, 0.9);
  const Eigen::VectorXd r = x - mu;
  const double expected = -std::log(2 * std::numbers::pi) - 0.5 * oracle::log_det_spd(cov) -
                          0.5 * r.dot(cov.inverse() * r);
  EXPECT_NEAR(q.log_density(x), expected, 1e-12);
}

TEST(VariationalDistribution, SamplingIsDeterministic) {
  const auto q = full_rank_t_fixture();
  const auto a = sample(q, 1000, 7);
  const auto b = sample(q, 1000, 7);
  EXPECT_TRUE(a.draws == b.draws);
  EXPECT_TRUE(a.base_noise == b.base_noise);
  EXPECT_FALSE(a.draws == sample(q, 1000, 8).draws);
}

TEST(VariationalDistribution, DrawsAreTheReparameterizedNoise) {
  for (const auto& q :
       {full_rank_t_fixture(),
        VariationalDistribution::mean_field_t(Eigen::Vector2d(1, 2), Eigen::Vector2d(0.5, 3), 40),
        VariationalDistribution::mean_field_gaussian(Eigen::Vector2d(1, 2),
                                                     Eigen::Vector2d(0.5, 3))}) {
    const auto batch = sample(q, 257, 3);
    EXPECT_TRUE(batch.draws == q.transform(batch.base_noise));
  }
}

TEST(VariationalDistribution, MeanFieldGaussianSampleMean) {
  constexpr int T = 100000;
  const Eigen::Vector3d mu(1.0, -3.0, 0.25);
  const Eigen::Vector3d sigma(0.5, 2.0, 1.0);
  const auto batch = sample(VariationalDistribution::mean_field_gaussian(mu, sigma), T, 21);
  const Eigen::VectorXd m = batch.draws.colwise().mean().transpose();
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(m(i), mu(i), 4.0 * sigma(i) / std::sqrt(T));
}

TEST(VariationalDistribution, MeanFieldTSampleVariance) {
  constexpr int T = 100000;
  const Eigen::Vector2d sigma(1.0, 2.5);
  const auto batch =
      sample(VariationalDistribution::mean_field_t(Eigen::Vector2d::Zero(), sigma, 40.0), T, 5);
  for (int i = 0; i < 2; ++i) {
    const Eigen::ArrayXd c = batch.draws.col(i).array() - batch.draws.col(i).mean();
    const double var = c.square().sum() / (T - 1);
    const double expected = 40.0 / 38.0 * sigma(i) * sigma(i);
    EXPECT_NEAR(var, expected, 0.05 * expected);
  }
}

TEST(VariationalDistribution, MomentExamples) {
  const auto t = moments(
      VariationalDistribution::mean_field_t(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Ones(4), 40));
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(t.cov(i, i), 40.0 / 38.0, 1e-14);
  EXPECT_NEAR(40.0 / 38.0, 1.05263, 1e-5);

  const auto g = moments(
      VariationalDistribution::mean_field_gaussian(Eigen::Vector2d(1, 2), Eigen::Vector2d(0.5, 3)));
  EXPECT_NEAR(g.cov(0, 0), 0.25, 1e-14);
  EXPECT_NEAR(g.cov(1, 1), 9.0, 1e-14);
  EXPECT_EQ(g.cov(0, 1), 0.0);

  Eigen::MatrixXd l(2, 2);
  l << 2, 0, 1, 1;
  const auto fr = moments(VariationalDistribution::full_rank_gaussian(Eigen::Vector2d::Zero(), l));
  Eigen::Matrix2d expected;
  expected << 4, 2, 2, 2;
  EXPECT_TRUE(fr.cov.isApprox(expected, 1e-14));

  const auto frt = moments(VariationalDistribution::full_rank_t(Eigen::Vector2d::Zero(), l, 6.0));
  EXPECT_TRUE(frt.cov.isApprox(1.5 * expected, 1e-14));
}

TEST(VariationalDistribution, VarianceUndefinedForSmallDf) {
  const auto q =
      VariationalDistribution::mean_field_t(Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones(), 2.0);
  EXPECT_THROW(moments(q), std::domain_error);
}

TEST(VariationalDistribution, InvalidScalesThrow) {
  EXPECT_THROW(VariationalDistribution::mean_field_gaussian(Eigen::Vector2d::Zero(),
                                                            Eigen::Vector2d(1.0, 0.0)),
               std::invalid_argument);
  Eigen::MatrixXd l(2, 2);
  l << 1, 0, 0.5, -1;
  EXPECT_THROW(VariationalDistribution::full_rank_gaussian(Eigen::Vector2d::Zero(), l),
               std::invalid_argument);
}

TEST(VariationalDistribution, MomentsAgreeWithLargeSample) {
  constexpr int T = 1000000;
  const auto q = full_rank_t_fixture();
  const auto m = moments(q);
  const auto batch = sample(q, T, 99);
  const Eigen::VectorXd mean = batch.draws.colwise().mean().transpose();
  const Eigen::MatrixXd centered = batch.draws.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (T - 1);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(mean(i), m.mean(i), 5.0 * std::sqrt(m.cov(i, i) / T));
    const double m4 = centered.col(i).array().pow(4).mean();
    const double se = std::sqrt((m4 - cov(i, i) * cov(i, i)) / T);
    EXPECT_NEAR(cov(i, i), m.cov(i, i), 5.0 * se);
  }
}

TEST(VariationalDistribution, ParameterRoundTrip) {
  const auto q = full_rank_t_fixture();
  const auto r = q.with_parameters(q.parameters());
  EXPECT_TRUE(r.loc().isApprox(q.loc()));
  EXPECT_TRUE(r.factor().isApprox(q.factor(), 1e-14));
  EXPECT_EQ(r.df(), q.df());
}

TEST(Rng, StreamsAreIndependentOfConsumptionOrder) {
  Rng a(42, 3);
  Rng other(42, 1);
  for (int i = 0; i < 100; ++i) other();
  Rng b(42, 3);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
}

}  // namespace
}  // namespace vibound
