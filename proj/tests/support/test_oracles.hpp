// Independent closed forms used as reference values in the tests. Nothing
// here calls into the library.
#ifndef VIBOUND_TEST_ORACLES_HPP
#define VIBOUND_TEST_ORACLES_HPP

#include <Eigen/Dense>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <random>

namespace oracle {

inline constexpr double kEulerGamma = 0.57721566490153286061;

inline Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

inline double log_det_spd(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  return es.eigenvalues().array().log().sum();
}

inline double gaussian_kl(const Eigen::VectorXd& m1, const Eigen::MatrixXd& s1,
                          const Eigen::VectorXd& m2, const Eigen::MatrixXd& s2) {
  const Eigen::MatrixXd s2inv = s2.inverse();
  const Eigen::VectorXd dm = m2 - m1;
  return 0.5 * ((s2inv * s1).trace() + dm.dot(s2inv * dm) - static_cast<double>(m1.size()) +
                log_det_spd(s2) - log_det_spd(s1));
}

/// D_alpha(N1 || N2); +inf when alpha * s2 + (1 - alpha) * s1 is not PD.
inline double gaussian_renyi(double alpha, const Eigen::VectorXd& m1, const Eigen::MatrixXd& s1,
                             const Eigen::VectorXd& m2, const Eigen::MatrixXd& s2) {
  const Eigen::MatrixXd mix = alpha * s2 + (1.0 - alpha) * s1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mix);
  if (es.eigenvalues().minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd dm = m1 - m2;
  return 0.5 * alpha * dm.dot(mix.inverse() * dm) -
         (log_det_spd(mix) - (1.0 - alpha) * log_det_spd(s1) - alpha * log_det_spd(s2)) /
             (2.0 * (alpha - 1.0));
}

inline double gaussian_w2(const Eigen::VectorXd& m1, const Eigen::MatrixXd& s1,
                          const Eigen::VectorXd& m2, const Eigen::MatrixXd& s2) {
  const Eigen::MatrixXd r = sqrtm_psd(s2);
  const double cross = sqrtm_psd(r * s1 * r).trace();
  return std::sqrt(std::max(0.0, (m1 - m2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * cross));
}

inline double gaussian_w2_1d(double m1, double sd1, double m2, double sd2) {
  return std::hypot(m1 - m2, sd1 - sd2);
}

/// W1 between 1-D Gaussians: E|X - Y| under the comonotone coupling, which
/// is |m + d Z| for Z standard normal.
inline double gaussian_w1_1d(double m1, double sd1, double m2, double sd2) {
  const double m = m1 - m2;
  const double s = std::abs(sd1 - sd2);
  if (s == 0.0) return std::abs(m);
  const double pi = boost::math::constants::pi<double>();
  return s * std::sqrt(2.0 / pi) * std::exp(-0.5 * m * m / (s * s)) +
         m * std::erf(m / (s * std::sqrt(2.0)));
}

/// KL(W(a, 1) || W(b, 1)).
inline double weibull_kl(double a, double b) {
  return std::log(a / b) - kEulerGamma * (a - b) / a - 1.0 + std::tgamma(1.0 + b / a);
}

/// log(4 * int_0^inf y^2 exp(-2 y^2 + y) dy).
inline double weibull_d2_constant() {
  boost::math::quadrature::exp_sinh<double> integrator;
  const double v =
      integrator.integrate([](double y) { return y * y * std::exp(-2.0 * y * y + y); });
  return std::log(4.0 * v);
}

inline double weibull_mean(double k) { return std::tgamma(1.0 + 1.0 / k); }
inline double weibull_variance(double k) {
  const double m = weibull_mean(k);
  return std::tgamma(1.0 + 2.0 / k) - m * m;
}

/// Quantile of t with 2 degrees of freedom.
inline double t2_quantile(double u) { return (2.0 * u - 1.0) / std::sqrt(2.0 * u * (1.0 - u)); }

inline double gpd_draw(std::mt19937_64& rng, double k, double sigma) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  while (u <= 0.0) u = unif(rng);
  if (std::abs(k) < 1e-12) return -sigma * std::log(u);
  return sigma * (std::pow(u, -k) - 1.0) / k;
}

inline Eigen::MatrixXd random_spd(int d, std::mt19937_64& rng, double lo = 0.2, double hi = 3.0) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> unif(lo, hi);
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = z(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd lambda(d);
  for (int i = 0; i < d; ++i) lambda(i) = unif(rng);
  return q * lambda.asDiagonal() * q.transpose();
}

inline Eigen::VectorXd random_vector(int d, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = z(rng);
  return v;
}

}  // namespace oracle

#endif
