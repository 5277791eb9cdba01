#include <vibound/numerics.hpp>
#include <vibound/psis.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace vibound {

namespace {

// Profile log-likelihood per observation at theta = -k / sigma.
double profile_log_likelihood(double theta, std::span<const double> x) {
  double k = 0.0;
  for (double v : x) k += std::log1p(-theta * v);
  k /= static_cast<double>(x.size());
  return std::log(-theta / k) - k - 1.0;
}

}  // namespace

GpdFit fit_generalized_pareto(std::span<const double> excesses) {
  const std::size_t n = excesses.size();
  if (n < 5) throw std::invalid_argument("tail too small: need at least 5 excesses");
  std::vector<double> x(excesses.begin(), excesses.end());
  for (double v : x)
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument("excesses must be positive and finite");
  std::sort(x.begin(), x.end());

  constexpr double kPrior = 3.0;
  const int m = 30 + static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  const double quartile = x[static_cast<std::size_t>(std::floor(n / 4.0 + 0.5)) - 1];
  std::vector<double> theta(m);
  std::vector<double> log_lik(m);
  for (int j = 1; j <= m; ++j) {
    theta[j - 1] = 1.0 / x.back() +
                   (1.0 - std::sqrt(m / (j - 0.5))) / (kPrior * quartile);
    log_lik[j - 1] = static_cast<double>(n) * profile_log_likelihood(theta[j - 1], x);
  }
  const double norm = log_sum_exp(log_lik);
  double theta_hat = 0.0;
  for (int j = 0; j < m; ++j) {
    const double w = std::exp(log_lik[j] - norm);
    if (std::isfinite(w)) theta_hat += theta[j] * w;
  }
  double k = 0.0;
  for (double v : x) k += std::log1p(-theta_hat * v);
  k /= static_cast<double>(n);
  return {k, -k / theta_hat};
}

double gpd_quantile(double u, double k, double sigma) {
  if (k == 0.0) return -sigma * std::log1p(-u);
  return sigma * std::expm1(-k * std::log1p(-u)) / k;
}

PSISResult psis_smooth(const Eigen::VectorXd& log_weights) {
  const Eigen::Index T = log_weights.size();
  if (T < 25) throw std::invalid_argument("PSIS needs at least 25 weights");
  if (!log_weights.allFinite()) throw std::invalid_argument("log weights must be finite");

  PSISResult r;
  const double top = log_weights.maxCoeff();
  Eigen::VectorXd lw = log_weights.array() - top;
  const int M = static_cast<int>(std::min(std::ceil(0.2 * T), std::ceil(3.0 * std::sqrt(T))));
  r.tail_count = M;

  std::vector<Eigen::Index> order(T);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return lw(a) < lw(b); });
  const double cutoff = lw(order[T - M - 1]);

  std::vector<double> excess;
  excess.reserve(M);
  for (Eigen::Index i = T - M; i < T; ++i) {
    const double e = std::exp(lw(order[i])) - std::exp(cutoff);
    if (e > 0.0) excess.push_back(e);
  }

  if (lw.minCoeff() == 0.0 || excess.size() < 5) {
    r.degenerate = true;
    r.k_hat = kDegenerateKHat;
    r.note = lw.minCoeff() == 0.0 ? "degenerate: uniform weights"
                                  : "degenerate: fewer than 5 distinct tail weights";
  } else {
    const GpdFit fit = fit_generalized_pareto(excess);
    r.k_hat = fit.k;
    r.gpd_scale = fit.sigma;
    if (std::isfinite(fit.k) && std::isfinite(fit.sigma) && fit.sigma > 0.0) {
      for (int i = 0; i < M; ++i) {
        const double u = (i + 0.5) / M;
        const double value = gpd_quantile(u, fit.k, fit.sigma) + std::exp(cutoff);
        lw(order[T - M + i]) = std::min(std::log(value), 0.0);
      }
    }
  }
  const std::span<const double> all(lw.data(), static_cast<std::size_t>(T));
  r.smoothed_log_weights = lw.array() - log_sum_exp(all);
  r.normalized = true;
  return r;
}

KHatCategory categorize_k_hat(double k_hat) {
  if (k_hat <= 0.5) return KHatCategory::Good;
  if (k_hat <= 0.7) return KHatCategory::Acceptable;
  return KHatCategory::Unreliable;
}

std::string to_string(KHatCategory category) {
  switch (category) {
    case KHatCategory::Good: return "good";
    case KHatCategory::Acceptable: return "acceptable";
    case KHatCategory::Unreliable: return "unreliable";
  }
  return "unknown";
}

WeightedMoments weighted_moments(const Eigen::MatrixXd& draws, const Eigen::VectorXd& weights) {
  if (draws.rows() != weights.size()) throw std::invalid_argument("weights and draws differ in length");
  const double total = weights.sum();
  if (!(total > 0.0)) throw std::invalid_argument("weights must have a positive sum");
  const Eigen::VectorXd w = weights / total;
  WeightedMoments m;
  m.mean = draws.transpose() * w;
  const Eigen::MatrixXd centered = draws.rowwise() - m.mean.transpose();
  m.cov = centered.transpose() * w.asDiagonal() * centered;
  m.cov = 0.5 * (m.cov + m.cov.transpose());
  m.std = m.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  m.mad = centered.cwiseAbs().transpose() * w;
  return m;
}

WeightedMoments psis_expectation(const Eigen::MatrixXd& draws, const PSISResult& result) {
  if (draws.rows() != result.smoothed_log_weights.size())
    throw std::invalid_argument("weights and draws differ in length");
  return weighted_moments(draws, result.smoothed_log_weights.array().exp().matrix());
}

}  // namespace vibound
