#ifndef VIBOUND_NUMERICS_HPP
#define VIBOUND_NUMERICS_HPP

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <span>
#include <utility>

namespace vibound {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> x);
double log_mean_exp(std::span<const double> x);
double mean(std::span<const double> x);
/// Unbiased sample variance; zero for fewer than two values.
double sample_variance(std::span<const double> x);

/// Spectral norm of a symmetric matrix.
double symmetric_spectral_norm(const Eigen::MatrixXd& a);

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

/**
 * Integrates f over (0, 1) with double-exponential quadrature.
 *
 * f receives (u, uc) where uc is the signed distance to the nearest endpoint:
 * uc < 0 means u = -uc exactly, uc > 0 means 1 - u = uc exactly. This lets
 * quantile integrands stay accurate arbitrarily close to 1.
 */
QuadratureResult integrate_unit_interval(
    const std::function<double(double, double)>& f, double tolerance = 1e-10);

/// Integrates f over [center, +inf) with f evaluated at center + scale * z.
QuadratureResult integrate_right_tail(const std::function<double(double)>& f,
                                      double center, double scale,
                                      double tolerance = 1e-11);

/// Integrates f over the real line, split at `center`.
QuadratureResult integrate_real_line(const std::function<double(double)>& f,
                                     double center, double scale,
                                     double tolerance = 1e-11);

/**
 * Detects a non-integrable tail: evaluates the window integrals of |f| on
 * [center + scale*2^j, center + scale*2^(j+1)] (direction +1 or -1) and
 * reports true when they fail to shrink for `run` consecutive windows.
 */
bool tail_diverges(const std::function<double(double)>& f, double center,
                   double scale, int direction, int run = 5);

/// Gauss-Hermite nodes and weights for the weight function exp(-x^2)
/// (Golub-Welsch).
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n);

}  // namespace vibound

#endif
