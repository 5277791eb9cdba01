#ifndef VIBOUND_ORACLES_HPP
#define VIBOUND_ORACLES_HPP

#include <vibound/distributions.hpp>
#include <vibound/models.hpp>
#include <vibound/psis.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace vibound {

/// W_p between 1-D distributions through the quantile coupling; +inf when
/// either distribution lacks a finite p-th moment.
double wasserstein_1d(const Scalar1D& a, const Scalar1D& b, double p);

/// W_2 between Gaussians (Bures formula). Throws std::invalid_argument for
/// covariances that are not positive semi-definite.
double wasserstein_gaussian(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1,
                            const Eigen::VectorXd& mu2, const Eigen::MatrixXd& cov2);

enum class GroundTruthMethod { ClosedForm, Quadrature, ReferenceMCMC };

std::string to_string(GroundTruthMethod method);

struct GroundTruth {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::VectorXd std;
  Eigen::VectorXd mad;
  GroundTruthMethod method = GroundTruthMethod::ClosedForm;
  /// Standard errors of the mean entries (reference MCMC only).
  Eigen::VectorXd mc_error;
  /// sqrt of the spectral norm of cov.
  double spectral_scale = 0.0;
  /// log of the normalizing constant (quadrature only).
  double log_normalizer = 0.0;
  double acceptance_rate = 0.0;
  /// Set when the sampler's post-adaptation acceptance is outside [0.05, 0.6].
  bool acceptance_warning = false;
};

/// Fills std and spectral_scale from mean and cov.
GroundTruth ground_truth_closed_form(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

struct QuadratureConfig {
  /// Initial half-width of the grid in whitened units and its step.
  double half_width = 8.0;
  double step = 0.25;
  /// Relative change in the moments at which step halving stops.
  double tolerance = 1e-9;
  /// Boundary-to-total mass ratio at which extent doubling stops.
  double boundary_mass = 1e-10;
  int max_refinements = 6;
};

/// Posterior moments of a target with dim <= 2 by trapezoid quadrature on a
/// grid whitened at the mode. Throws std::runtime_error if the grid
/// extent or resolution fails to converge.
GroundTruth quadrature_posterior_moments(const TargetModel& target,
                                         const QuadratureConfig& config = {});

struct ReferenceSamplerConfig {
  long steps = 200000;
  long burn_in = 20000;
  int chains = 4;
  /// Keep one draw in `thin` after burn-in.
  int thin = 10;
  std::uint64_t seed = 1;
  /// Starting point; the origin when absent.
  std::optional<Eigen::VectorXd> init;
};

/**
 * Adaptive random-walk Metropolis with a diagonal proposal tuned toward 23.4%
 * acceptance during burn-in and frozen afterwards. Chains run on split seed
 * streams. `report` maps each kept draw to the reporting coordinates before
 * moments are taken. Mean standard errors use batch means.
 */
GroundTruth reference_sampler(
    const TargetModel& target, const ReferenceSamplerConfig& config,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& report = nullptr);

struct ErrorMetrics {
  double mean_error = 0.0;
  double std_error = 0.0;
  /// sqrt of the spectral norm of the covariance difference.
  double cov_error = 0.0;
  std::optional<double> psis_mean_error;
  std::optional<double> psis_std_error;
  std::optional<double> psis_cov_error;
};

ErrorMetrics error_metrics(const GroundTruth& truth, const Moments& approx,
                           const std::optional<WeightedMoments>& psis = std::nullopt);

}  // namespace vibound

#endif
