#ifndef VIBOUND_PSIS_HPP
#define VIBOUND_PSIS_HPP

#include <Eigen/Dense>

#include <span>
#include <string>

namespace vibound {

struct GpdFit {
  double k = 0.0;
  double sigma = 1.0;
};

/// Profile-likelihood generalized Pareto fit (Zhang and Stephens) to
/// positive excesses; k is reported without small-sample adjustment.
/// Throws std::invalid_argument ("tail too small") for fewer than 5 values.
GpdFit fit_generalized_pareto(std::span<const double> excesses);

/// Generalized Pareto quantile with zero location.
double gpd_quantile(double u, double k, double sigma);

/// Sentinel reported as k_hat when the weights are degenerate.
inline constexpr double kDegenerateKHat = -1e10;

struct PSISResult {
  double k_hat = 0.0;
  int tail_count = 0;
  /// Smoothed log weights, normalized so that their exponentials sum to 1.
  Eigen::VectorXd smoothed_log_weights;
  bool normalized = true;
  double gpd_scale = 1.0;
  bool degenerate = false;
  std::string note;
};

/// Pareto-smoothed importance sampling of raw log weights (T >= 25).
/// The tail holds the M = min(ceil(0.2 T), ceil(3 sqrt(T))) largest weights.
PSISResult psis_smooth(const Eigen::VectorXd& log_weights);

enum class KHatCategory { Good, Acceptable, Unreliable };

/// Good for k <= 0.5, acceptable for k <= 0.7, unreliable above.
KHatCategory categorize_k_hat(double k_hat);
std::string to_string(KHatCategory category);

struct WeightedMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  /// Mean absolute deviation about the weighted mean, per coordinate.
  Eigen::VectorXd mad;
  Eigen::MatrixXd cov;
};

/// Self-normalized weighted moments of the rows of `draws`.
WeightedMoments weighted_moments(const Eigen::MatrixXd& draws, const Eigen::VectorXd& weights);

/// Weighted moments using the smoothed PSIS weights.
WeightedMoments psis_expectation(const Eigen::MatrixXd& draws, const PSISResult& result);

}  // namespace vibound

#endif
