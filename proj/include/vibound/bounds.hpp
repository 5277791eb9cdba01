#ifndef VIBOUND_BOUNDS_HPP
#define VIBOUND_BOUNDS_HPP

#include <vibound/distributions.hpp>
#include <vibound/inference.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vibound {

/**
 * Polynomial (PIC) or exponential (EIC) moment constant of a distribution.
 *
 * The defining infima over the center and over epsilon are replaced by
 * evaluation at `center` (default: the mean) and at `epsilon`; both give
 * valid upper bounds on the true constant.
 */
struct MomentConstant {
  enum class Kind { PolyPIC, ExpEIC } kind = Kind::PolyPIC;
  enum class Method { Analytic, MonteCarlo } method = Method::Analytic;
  double p = 2.0;
  double value = 0.0;
  Eigen::VectorXd center;
  double epsilon = 0.0;
  double mc_error = 0.0;
  /// log E exp(eps ||theta - center||^p) (EIC only) and its standard error.
  double log_mgf = 0.0;
  double log_mgf_error = 0.0;
  int T = 0;
  std::uint64_t seed = 0;
  /// Explains an infinite value.
  std::string note;
};

std::string to_string(MomentConstant::Kind kind);
std::string to_string(MomentConstant::Method method);

/// PIC_p from exact moments, p in {2, 4}. Infinite for t kinds with df <= p.
MomentConstant pic_analytic(const VariationalDistribution& q, int p);

/// pic_analytic when a closed form exists, otherwise pic_monte_carlo.
MomentConstant pic_best_available(const VariationalDistribution& q, int p, int T,
                                  std::uint64_t seed);

MomentConstant pic_monte_carlo(const VariationalDistribution& q, double p, int T,
                               std::uint64_t seed,
                               const std::optional<Eigen::VectorXd>& center = std::nullopt);

/// Monte Carlo estimate of E ||theta - center||^power with its standard error.
struct NormMoment {
  double value = 0.0;
  double mc_error = 0.0;
};

NormMoment norm_moment_monte_carlo(const VariationalDistribution& q, double power, int T,
                                   std::uint64_t seed,
                                   const std::optional<Eigen::VectorXd>& center = std::nullopt);

/// Exact E ||theta - mean||^power for even powers: any power for Gaussian
/// and full-rank t kinds, powers 2 and 4 for mean-field t. +inf when the
/// moment does not exist; nullopt when no closed form is available.
std::optional<double> norm_moment_analytic(const VariationalDistribution& q, int power);

/// log E exp(eps ||X - mean||^2) for X ~ N(mean, cov); +inf when 2 eps
/// times the top eigenvalue of cov reaches 1.
double gaussian_log_mgf_squared_norm(const Eigen::MatrixXd& cov, double eps);

/// Largest eps accepted by the Monte Carlo EIC estimator for p = 2.
double eic_stable_epsilon_limit(const VariationalDistribution& q);

/**
 * EIC_p at fixed (center, eps) from draws of q.
 *
 * t kinds and Gaussian kinds with p > 2 give +inf with a note. For p = 2 an
 * eps at or above eic_stable_epsilon_limit(q) throws std::domain_error,
 * since the estimator is then dominated by its tail.
 */
MomentConstant eic_monte_carlo(const VariationalDistribution& q, double p, double eps, int T,
                               std::uint64_t seed,
                               const std::optional<Eigen::VectorXd>& center = std::nullopt);

/// EIC values over an epsilon grid sharing one set of draws.
struct EICScan {
  std::vector<double> epsilons;
  std::vector<MomentConstant> constants;
  /// Index of the smallest value.
  std::size_t best = 0;
  const MomentConstant& best_constant() const { return constants.at(best); }
};

/// 25-point log-spaced grid. Empty grid (all +inf) for t kinds.
EICScan eic_scan(const VariationalDistribution& q, double p, int T, std::uint64_t seed,
                 int points = 25);

/// log E exp(eps ||theta - center||^power) over a grid of eps, from draws of q.
struct LogMgfScan {
  std::vector<double> epsilons;
  std::vector<double> log_mgf;
};

LogMgfScan log_mgf_scan(const VariationalDistribution& q, double power,
                        const std::vector<double>& epsilons, int T, std::uint64_t seed);

/// Log-spaced grid [lo, hi] with n points.
std::vector<double> log_grid(double lo, double hi, int n);

struct DivergenceBound {
  double alpha = 2.0;
  double delta_bar = 0.0;
  ObjectiveEstimate cubo;
  ObjectiveEstimate elbo;
  double combined_mc_error = 0.0;

  /// delta_bar + z * combined_mc_error.
  double inflated(double z) const { return delta_bar + z * combined_mc_error; }
};

/// (alpha / (alpha - 1)) * (CUBO - ELBO). Throws std::domain_error
/// ("estimator inconsistency") when CUBO falls below ELBO by more than six
/// combined standard errors.
DivergenceBound divergence_bound(const ObjectiveEstimate& cubo, const ObjectiveEstimate& elbo);

enum class BoundMethod { PI, EI, PolyQ, SqrtEI, EI2p };

std::string to_string(BoundMethod method);

struct WassersteinBound {
  BoundMethod method = BoundMethod::PI;
  double p = 2.0;
  double value = 0.0;
  double alpha = 2.0;
  std::map<std::string, double> inputs;
  std::string note;
};

/// pic_2p * (exp(delta) - 1)^(1 / (2p)), delta an upper bound on D_2.
WassersteinBound wasserstein_bound_pi(const MomentConstant& pic_2p, double delta, double p);
WassersteinBound wasserstein_bound_pi(const MomentConstant& pic_2p, const DivergenceBound& delta,
                                      double p);

/// eic_p * (kl^(1/p) + (kl / 2)^(1 / (2p))).
WassersteinBound wasserstein_bound_ei(const MomentConstant& eic_p, double kl_bound, double p);

struct PolyMoments {
  /// E ||theta - center||^(2p) under the approximation.
  double moment_2p = 0.0;
  /// E ||theta - center||^(2pq), q = alpha / (alpha - 1).
  double moment_2pq = 0.0;
};

/// 2 * C(alpha) * kl^(1/(2p)) with
/// C = [m_2p^(1/2) + (m_2pq / (2^(2q-2) q) + 4 exp((alpha-1) D) / alpha)^(1/2)]^(1/p).
WassersteinBound wasserstein_bound_poly_q(double alpha, const PolyMoments& moments,
                                          double d_alpha_bound, double kl_bound, double p);

/**
 * Bound from exponential integrability of order p/2 and a Renyi bound.
 *
 * With r = alpha / (alpha - 1) and K = log E exp(eps ||theta - center||^(p/2)):
 * [(2^p / eps^2) (27 r^2 + 18 + 5 K^2 + 3 D^2)]^(1/p) * kl^(1/(2p)).
 */
WassersteinBound wasserstein_bound_sqrt_ei(double alpha, double log_mgf, double d_alpha_bound,
                                           double kl_bound, double p, double eps);
/// Minimum of the single-eps bound over a scan of K(eps).
WassersteinBound wasserstein_bound_sqrt_ei(double alpha, const LogMgfScan& scan,
                                           double d_alpha_bound, double kl_bound, double p);

/// C * kl^(1/(2p)), C = 2 min over eps of [(1 + K(eps)) / (2 eps)]^(1/(2p)),
/// K(eps) = log E exp(eps ||theta - center||^(2p)).
WassersteinBound wasserstein_bound_ei2p(const LogMgfScan& scan, double kl_bound, double p);

struct SummaryErrorBounds {
  double mean_bound = 0.0;
  double mad_bound = 0.0;
  double std_bound = 0.0;
  double cov_bound = 0.0;
  double S = 0.0;
};

/// Bounds on posterior summary errors from W1 and/or W2 bounds. Missing
/// inputs make the bounds that need them +inf.
SummaryErrorBounds summary_error_bounds(std::optional<double> w1, std::optional<double> w2,
                                        double S);

/// Bound on W_p between predictive distributions for a likelihood whose
/// parameter-to-predictive map is C-Lipschitz.
double predictive_bound(double lipschitz, double w_p, double p);

}  // namespace vibound

#endif
