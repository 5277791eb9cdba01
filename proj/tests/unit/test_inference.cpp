#include <vibound/bounds.hpp>
#include <vibound/divergences.hpp>
#include <vibound/inference.hpp>
#include <vibound/models.hpp>

#include "test_oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace vibound {
namespace {

TargetModel conjugate() { return model_by_name("conjugate"); }

VariationalDistribution exact_posterior(const TargetModel& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m.exact->cov);
  return VariationalDistribution::full_rank_gaussian(m.exact->mean, llt.matrixL());
}

VariationalDistribution offset_gaussian(const TargetModel& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m.exact->cov);
  Eigen::MatrixXd l = llt.matrixL();
  l *= 1.15;
  Eigen::VectorXd mu = m.exact->mean;
  mu(0) += 0.1;
  return VariationalDistribution::full_rank_gaussian(mu, l);
}

TEST(Estimators, ExactPosteriorGivesLogEvidence) {
  const auto m = conjugate();
  const auto q = exact_posterior(m);
  const auto elbo = estimate_elbo(m, q, 10000, 1);
  const auto cubo = estimate_cubo(m, q, 10000, 1);
  EXPECT_NEAR(elbo.value, m.exact->log_evidence, 1e-9);
  EXPECT_NEAR(cubo.value, m.exact->log_evidence, 1e-9);
  EXPECT_LT(elbo.mc_std_error, 1e-9);
  EXPECT_EQ(elbo.T, 10000);
  EXPECT_EQ(cubo.kind, Objective::CUBO);
}

TEST(Estimators, ElboMatchesClosedFormKl) {
  const auto m = conjugate();
  const auto q = offset_gaussian(m);
  const auto mq = moments(q);
  const double kl = oracle::gaussian_kl(mq.mean, mq.cov, m.exact->mean, m.exact->cov);
  const auto elbo = estimate_elbo(m, q, 100000, 2);
  EXPECT_NEAR(elbo.value, m.exact->log_evidence - kl, 4.0 * elbo.mc_std_error);
}

TEST(Estimators, CuboMatchesClosedFormRenyi) {
  const auto m = conjugate();
  const auto q = offset_gaussian(m);
  const auto mq = moments(q);
  const double d2 = oracle::gaussian_renyi(2.0, m.exact->mean, m.exact->cov, mq.mean, mq.cov);
  const auto cubo = estimate_cubo(m, q, 100000, 3);
  EXPECT_NEAR(cubo.value, m.exact->log_evidence + 0.5 * d2, 4.0 * cubo.mc_std_error);
}

TEST(Estimators, SeedsAgreeWithinMonteCarloError) {
  const auto m = conjugate();
  const auto q = offset_gaussian(m);
  const auto a = estimate_elbo(m, q, 10000, 10);
  const auto b = estimate_elbo(m, q, 10000, 11);
  EXPECT_NE(a.value, b.value);
  EXPECT_LE(std::abs(a.value - b.value), 6.0 * std::hypot(a.mc_std_error, b.mc_std_error));
}

TEST(Estimators, SandwichAroundLogEvidence) {
  const auto m = conjugate();
  const auto q = offset_gaussian(m);
  const auto elbo = estimate_elbo(m, q, 10000, 4);
  const auto cubo = estimate_cubo(m, q, 10000, 5);
  EXPECT_LE(elbo.value, cubo.value + 6.0 * std::hypot(elbo.mc_std_error, cubo.mc_std_error));
  EXPECT_LE(elbo.value, m.exact->log_evidence + 3.0 * elbo.mc_std_error);
}

TEST(Estimators, CuboBiasShrinksWithSampleSize) {
  const auto m = conjugate();
  const auto q = offset_gaussian(m);
  double small = 0.0;
  double large = 0.0;
  constexpr int kReps = 2000;
  for (int r = 0; r < kReps; ++r) {
    small += estimate_cubo(m, q, 5, derive_seed(7, r)).value;
    large += estimate_cubo(m, q, 500, derive_seed(8, r)).value;
  }
  const auto mq = moments(q);
  const double exact =
      m.exact->log_evidence +
      0.5 * oracle::gaussian_renyi(2.0, m.exact->mean, m.exact->cov, mq.mean, mq.cov);
  EXPECT_LE(small / kReps, large / kReps);
  EXPECT_LE(large / kReps, exact);
}

TEST(Estimators, NonFiniteTargetReportsPoint) {
  TargetModel bad;
  bad.name = "bad";
  bad.dim = 1;
  bad.transforms = {CoordinateTransform::Identity};
  bad.evaluate = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = Eigen::VectorXd::Zero(1);
    return x(0) > 0.0 ? std::nan("") : 0.0;
  };
  const auto q = VariationalDistribution::mean_field_gaussian(Eigen::VectorXd::Zero(1),
                                                              Eigen::VectorXd::Ones(1));
  try {
    estimate_elbo(bad, q, 100, 1);
    FAIL() << "expected NonFiniteDensityError";
  } catch (const NonFiniteDensityError& e) {
    EXPECT_GT(e.point()(0), 0.0);
  }
}

TEST(Gradients, VanishOnAverageAtOptimum) {
  const auto m = conjugate();
  const auto q = exact_posterior(m);
  const int n = q.num_parameters();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(n);
  constexpr int kReps = 100;
  for (int r = 0; r < kReps; ++r) {
    const Eigen::VectorXd g = grad_estimate(m, q, 10, derive_seed(3, r), Objective::ELBO);
    sum += g;
    sum_sq += g.cwiseProduct(g);
  }
  const Eigen::VectorXd mean = sum / kReps;
  const Eigen::VectorXd var = (sum_sq / kReps - mean.cwiseProduct(mean)) * kReps / (kReps - 1);
  const double se = std::sqrt(var.sum() / kReps);
  EXPECT_LT(mean.norm(), 3.0 * se);
}

void expect_gradient_matches_common_random_numbers(Objective objective) {
  const auto m = conjugate();
  const auto q = offset_gaussian(m);
  constexpr int T = 200;
  constexpr std::uint64_t seed = 12;
  const Eigen::VectorXd g = grad_estimate(m, q, T, seed, objective);
  const Eigen::VectorXd p = q.parameters();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double h = 1e-5;
    Eigen::VectorXd pp = p;
    Eigen::VectorXd pm = p;
    pp(i) += h;
    pm(i) -= h;
    auto value = [&](const Eigen::VectorXd& params) {
      const auto qi = q.with_parameters(params);
      return objective == Objective::ELBO ? estimate_elbo(m, qi, T, seed).value
                                          : estimate_cubo(m, qi, T, seed).value;
    };
    const double fd = (value(pp) - value(pm)) / (2 * h);
    EXPECT_NEAR(g(i), fd, 1e-4 * std::max(1.0, std::abs(fd))) << "parameter " << i;
  }
}

TEST(Gradients, ElboMatchesFiniteDifferences) {
  expect_gradient_matches_common_random_numbers(Objective::ELBO);
}

TEST(Gradients, CuboMatchesFiniteDifferences) {
  expect_gradient_matches_common_random_numbers(Objective::CUBO);
}

TEST(Fit, KlviRecoversConjugatePosterior) {
  const auto m = conjugate();
  OptimizerConfig config;
  const auto r = fit(m, FamilySpec{VariationalKind::FullRankGaussian, 40.0}, Objective::ELBO, config);
  const auto mq = moments(r.q);
  EXPECT_LT((mq.mean - m.exact->mean).cwiseAbs().maxCoeff(), 0.02);
  for (int i = 0; i < m.dim; ++i)
    EXPECT_NEAR(mq.cov(i, i), m.exact->cov(i, i), 0.05 * m.exact->cov(i, i));
  EXPECT_LT((mq.cov - m.exact->cov).norm(), 0.05 * m.exact->cov.norm());
  EXPECT_FALSE(r.objective_trace.empty());
  EXPECT_EQ(static_cast<int>(r.objective_trace.size()), config.iterations);
}

TEST(Fit, ChiviRecoversConjugatePosterior) {
  const auto m = conjugate();
  OptimizerConfig config;
  config.mc_samples_per_step = 200;
  config.iterations = 3000;
  const auto r = fit(m, FamilySpec{VariationalKind::FullRankGaussian, 40.0}, Objective::CUBO, config);
  const auto mq = moments(r.q);
  EXPECT_LT((mq.mean - m.exact->mean).cwiseAbs().maxCoeff(), 0.02);
  for (int i = 0; i < m.dim; ++i)
    EXPECT_NEAR(mq.cov(i, i), m.exact->cov(i, i), 0.05 * m.exact->cov(i, i));
  EXPECT_LT((mq.cov - m.exact->cov).norm(), 0.05 * m.exact->cov.norm());
}

TEST(Fit, MeanFieldKlviFindsPrecisionDiagonal) {
  ConjugateGaussianSpec spec;
  spec.prior_mean = Eigen::Vector2d(1.0, -1.0);
  spec.prior_cov = Eigen::Matrix2d{{1.0, 0.8}, {0.8, 1.0}};
  spec.design = Eigen::MatrixXd(0, 2);
  spec.y = Eigen::VectorXd(0);
  const auto m = conjugate_gaussian(spec);
  OptimizerConfig config;
  config.mc_samples_per_step = 200;
  const auto r =
      fit(m, FamilySpec{VariationalKind::MeanFieldGaussian, 40.0}, Objective::ELBO, config);
  const Eigen::MatrixXd precision = spec.prior_cov.inverse();
  const auto mq = moments(r.q);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(mq.cov(i, i), 1.0 / precision(i, i), 0.05 / precision(i, i));
    EXPECT_NEAR(mq.mean(i), spec.prior_mean(i), 0.03);
  }
  EXPECT_NEAR(oracle::gaussian_kl(mq.mean, mq.cov, spec.prior_mean, spec.prior_cov),
              mean_field_gaussian_kl(2, 0.8), 0.01);
}

TEST(Fit, IsDeterministic) {
  const auto m = conjugate();
  OptimizerConfig config;
  config.iterations = 400;
  const auto a = fit(m, FamilySpec{}, Objective::ELBO, config);
  const auto b = fit(m, FamilySpec{}, Objective::ELBO, config);
  EXPECT_TRUE(a.q.parameters() == b.q.parameters());
  EXPECT_EQ(a.objective_trace, b.objective_trace);
  EXPECT_EQ(a.best_iteration, b.best_iteration);
}

TEST(Fit, RejectsInvalidConfig) {
  OptimizerConfig config;
  config.step_size = 0.0;
  EXPECT_THROW(fit(conjugate(), FamilySpec{}, Objective::ELBO, config), std::invalid_argument);
  config = {};
  config.step_decay = 1.5;
  EXPECT_THROW(config.validate(), std::invalid_argument);
}

TEST(Fit, DivergenceCarriesTrace) {
  TargetModel runaway;
  runaway.name = "runaway";
  runaway.dim = 1;
  runaway.transforms = {CoordinateTransform::Identity};
  runaway.evaluate = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = Eigen::VectorXd::Ones(1);
    return x(0) < 20.0 ? x(0) : std::numeric_limits<double>::infinity();
  };
  OptimizerConfig config;
  config.iterations = 2000;
  config.step_size = 0.5;
  try {
    fit(runaway, FamilySpec{VariationalKind::MeanFieldGaussian, 40.0}, Objective::ELBO, config);
    FAIL() << "expected FitDivergedError";
  } catch (const FitDivergedError& e) {
    EXPECT_FALSE(e.trace().empty());
  }
}

}  // namespace
}  // namespace vibound
