#include <vibound/numerics.hpp>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vibound {

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -kInf;
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

double log_mean_exp(std::span<const double> x) {
  return log_sum_exp(x) - std::log(static_cast<double>(x.size()));
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double symmetric_spectral_norm(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

QuadratureResult integrate_unit_interval(
    const std::function<double(double, double)>& f, double tolerance) {
  thread_local boost::math::quadrature::tanh_sinh<double> integrator(15);
  QuadratureResult r;
  double l1 = 0.0;
  r.value = integrator.integrate(
      [&](double u, double uc) { return f(u, uc); }, 0.0, 1.0, tolerance,
      &r.error, &l1);
  return r;
}

QuadratureResult integrate_right_tail(const std::function<double(double)>& f,
                                      double center, double scale,
                                      double tolerance) {
  thread_local boost::math::quadrature::exp_sinh<double> integrator(12);
  QuadratureResult r;
  double l1 = 0.0;
  r.value = scale * integrator.integrate(
                        [&](double z) { return f(center + scale * z); },
                        tolerance, &r.error, &l1);
  r.error *= scale;
  return r;
}

QuadratureResult integrate_real_line(const std::function<double(double)>& f,
                                     double center, double scale,
                                     double tolerance) {
  const auto right = integrate_right_tail(f, center, scale, tolerance);
  const auto left = integrate_right_tail([&](double x) { return f(2.0 * center - x); },
                                         center, scale, tolerance);
  return {right.value + left.value, right.error + left.error};
}

bool tail_diverges(const std::function<double(double)>& f, double center,
                   double scale, int direction, int run) {
  using gauss = boost::math::quadrature::gauss<double, 15>;
  const double dir = direction >= 0 ? 1.0 : -1.0;
  auto window = [&](double lo, double hi) {
    return gauss::integrate(
        [&](double z) { return std::abs(f(center + dir * scale * z)); }, lo, hi);
  };
  const double reference = window(0.0, 1.0);
  double previous = window(1.0, 2.0);
  if (!std::isfinite(previous)) return true;
  int growing = 0;
  double lo = 2.0;
  for (int j = 1; j < 48; ++j, lo *= 2.0) {
    const double w = window(lo, 2.0 * lo);
    if (!std::isfinite(w)) return true;
    const bool significant = w > 1e-12 * std::max(reference, 1e-300);
    if (significant && previous > 0.0 && w >= previous) {
      if (++growing >= run) return true;
    } else {
      growing = 0;
    }
    if (w == 0.0 && previous == 0.0) break;
    previous = w;
  }
  return false;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n > 1 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  Eigen::VectorXd nodes = solver.eigenvalues();
  Eigen::VectorXd weights(n);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    const double v0 = solver.eigenvectors()(0, i);
    weights(i) = sqrt_pi * v0 * v0;
  }
  return {nodes, weights};
}

}  // namespace vibound
