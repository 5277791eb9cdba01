#ifndef VIBOUND_DIVERGENCES_HPP
#define VIBOUND_DIVERGENCES_HPP

#include <vibound/distributions.hpp>

#include <Eigen/Dense>

namespace vibound {

/// KL(N(mu1, cov1) || N(mu2, cov2)). Throws std::invalid_argument unless
/// both covariances are positive definite.
double kl_gaussians(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1,
                    const Eigen::VectorXd& mu2, const Eigen::MatrixXd& cov2);

/// Renyi divergence of order alpha between Gaussians; +inf when
/// alpha * cov2 + (1 - alpha) * cov1 is not positive definite.
double renyi_gaussians(double alpha, const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1,
                       const Eigen::VectorXd& mu2, const Eigen::MatrixXd& cov2);

struct DivergenceKind {
  enum class Type { KL, Renyi } type = Type::KL;
  double alpha = 1.0;

  static DivergenceKind kl() { return {Type::KL, 1.0}; }
  static DivergenceKind renyi(double alpha) { return {Type::Renyi, alpha}; }
};

/**
 * KL(a || b) or D_alpha(a || b) by adaptive quadrature.
 *
 * The integral is taken over the support of `a` in coordinates where it is
 * the whole real line, split at the median of `a`. Returns +inf when the
 * integrand tail fails to decay. Throws std::runtime_error when the
 * quadrature does not reach its tolerance.
 */
double divergence_1d_quadrature(DivergenceKind kind, const Scalar1D& a, const Scalar1D& b);

/// KL(N(0, 1) || t_h) via Gauss-Hermite quadrature of E log(1 + Z^2 / h).
double kl_gaussian_vs_t(double df);

/// KL(q* || N(0, Sigma)) for the optimal mean-field Gaussian q* when Sigma
/// has unit variances and common correlation rho.
double mean_field_gaussian_kl(int dim, double rho);

}  // namespace vibound

#endif
