#ifndef VIBOUND_MODELS_HPP
#define VIBOUND_MODELS_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vibound {

enum class CoordinateTransform { Identity, Log };

/// Closed-form posterior attached to fixtures that have one.
struct ExactPosterior {
  double log_evidence = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/**
 * Unnormalized log posterior on the unconstrained space.
 *
 * `evaluate(theta, grad)` returns log pi*(theta), including the log-Jacobian
 * of any coordinate transform, and writes the gradient when `grad` is
 * non-null. Evaluation is pure, so a model can be shared across threads.
 */
struct TargetModel {
  std::string name;
  int dim = 0;
  std::vector<CoordinateTransform> transforms;
  std::vector<std::string> coordinate_names;
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)> evaluate;
  std::optional<ExactPosterior> exact;

  double log_density(const Eigen::VectorXd& theta) const { return evaluate(theta, nullptr); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  /// Maps an unconstrained point to the original parameterization.
  Eigen::VectorXd to_constrained(const Eigen::VectorXd& theta) const;
};

struct EightSchoolsData {
  Eigen::VectorXd y;
  Eigen::VectorXd sigma;
};

/// The canonical eight schools measurements.
EightSchoolsData eight_schools_data();
EightSchoolsData load_eight_schools_data(const std::string& path);

struct RobustRegressionData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd true_beta;
  double corr = 0.0;
  std::uint64_t seed = 0;
};

/// Coordinates (mu, log tau, theta_1..theta_n).
TargetModel eight_schools_centered(const EightSchoolsData& data);
/// Coordinates (mu, log tau, theta_tilde_1..theta_tilde_n) with
/// theta_n = mu + tau * theta_tilde_n.
TargetModel eight_schools_noncentered(const EightSchoolsData& data);

/// Maps a non-centered point to the matching centered point.
Eigen::VectorXd noncentered_to_centered(const Eigen::VectorXd& theta);

TargetModel robust_regression(const RobustRegressionData& data, double prior_sd = 10.0,
                              double lik_df = 40.0);

RobustRegressionData generate_robust_regression_data(int N, int d,
                                                     const Eigen::VectorXd& beta,
                                                     double corr, std::uint64_t seed);

/// The default case-study dataset: N = 25, d = 2, beta = (-2, 1), corr 0.75.
RobustRegressionData default_robust_regression_data();

struct ConjugateGaussianSpec {
  Eigen::VectorXd prior_mean;
  Eigen::MatrixXd prior_cov;
  /// Observation design: y ~ N(design * theta, noise_sd^2 I).
  Eigen::MatrixXd design;
  Eigen::VectorXd y;
  double noise_sd = 1.0;
};

TargetModel conjugate_gaussian(const ConjugateGaussianSpec& spec);

/// A correlated conjugate fixture of the given dimension, generated from seed.
ConjugateGaussianSpec conjugate_fixture(int dim, std::uint64_t seed);

/// Builds a model by name: eight-schools-centered, eight-schools-noncentered,
/// robust-regression, conjugate. Throws std::invalid_argument otherwise.
TargetModel model_by_name(const std::string& name);

}  // namespace vibound

#endif
