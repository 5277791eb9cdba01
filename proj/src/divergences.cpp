#include <vibound/divergences.hpp>
#include <vibound/numerics.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vibound {

namespace {

Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& cov, const char* what) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument(std::string(what) + " is not square");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument(std::string(what) + " is not positive definite");
  return llt;
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Coordinates s on the real line for the support of a distribution:
// identity, x = lower + e^s, or a logistic map onto a bounded interval.
struct Chart {
  enum class Kind { Line, HalfLine, Interval } kind = Kind::Line;
  double lower = 0.0;
  double upper = 0.0;

  double x(double s) const {
    switch (kind) {
      case Kind::Line: return s;
      case Kind::HalfLine: return lower + std::exp(s);
      case Kind::Interval: return lower + (upper - lower) / (1.0 + std::exp(-s));
    }
    return s;
  }

  double log_jacobian(double s) const {
    switch (kind) {
      case Kind::Line: return 0.0;
      case Kind::HalfLine: return s;
      case Kind::Interval: {
        const double log_sig = -std::log1p(std::exp(-s));
        const double log_sig_neg = -std::log1p(std::exp(s));
        return std::log(upper - lower) + log_sig + log_sig_neg;
      }
    }
    return 0.0;
  }

  double s_of(double x) const {
    switch (kind) {
      case Kind::Line: return x;
      case Kind::HalfLine: return std::log(x - lower);
      case Kind::Interval: {
        const double u = (x - lower) / (upper - lower);
        return std::log(u) - std::log1p(-u);
      }
    }
    return x;
  }
};

Chart chart_for(const Scalar1D& d) {
  Chart c;
  const double lo = d.support_lower();
  const double hi = d.support_upper();
  if (std::isfinite(lo) && std::isfinite(hi)) {
    c.kind = Chart::Kind::Interval;
    c.lower = lo;
    c.upper = hi;
  } else if (std::isfinite(lo)) {
    c.kind = Chart::Kind::HalfLine;
    c.lower = lo;
  }
  return c;
}

// log density at chart.x(s); Weibull on the half-line keeps log x = s exact
// so that tiny shapes do not lose their left tail to underflow.
double log_density_in_chart(const Scalar1D& d, const Chart& chart, double s) {
  if (d.family() == Family1D::Weibull && chart.kind == Chart::Kind::HalfLine &&
      chart.lower == 0.0) {
    const double k = d.shape();
    const double log_r = s - std::log(d.scale());
    return std::log(k / d.scale()) + (k - 1.0) * log_r - std::exp(k * log_r);
  }
  return d.log_density(chart.x(s));
}

}  // namespace

double kl_gaussians(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1,
                    const Eigen::VectorXd& mu2, const Eigen::MatrixXd& cov2) {
  const Eigen::Index d = mu1.size();
  if (mu2.size() != d || cov1.rows() != d || cov2.rows() != d)
    throw std::invalid_argument("dimension mismatch");
  const auto llt1 = checked_llt(cov1, "first covariance");
  const auto llt2 = checked_llt(cov2, "second covariance");
  const Eigen::VectorXd diff = mu2 - mu1;
  const double trace = llt2.solve(cov1).trace();
  const double quad = diff.dot(llt2.solve(diff));
  return 0.5 * (trace + quad - static_cast<double>(d) + log_det(llt2) - log_det(llt1));
}

double renyi_gaussians(double alpha, const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1,
                       const Eigen::VectorXd& mu2, const Eigen::MatrixXd& cov2) {
  if (!(alpha > 0.0) || alpha == 1.0)
    throw std::invalid_argument("Renyi order must be positive and different from 1");
  const Eigen::Index d = mu1.size();
  if (mu2.size() != d || cov1.rows() != d || cov2.rows() != d)
    throw std::invalid_argument("dimension mismatch");
  const auto llt1 = checked_llt(cov1, "first covariance");
  const auto llt2 = checked_llt(cov2, "second covariance");
  const Eigen::MatrixXd mixed = alpha * cov2 + (1.0 - alpha) * cov1;
  Eigen::LLT<Eigen::MatrixXd> llt_mixed(mixed);
  if (llt_mixed.info() != Eigen::Success) return kInf;
  if ((llt_mixed.matrixLLT().diagonal().array() <= 0.0).any()) return kInf;
  const Eigen::VectorXd diff = mu2 - mu1;
  const double quad = diff.dot(llt_mixed.solve(diff));
  const double log_ratio =
      log_det(llt_mixed) - (1.0 - alpha) * log_det(llt1) - alpha * log_det(llt2);
  return 0.5 * alpha * quad - log_ratio / (2.0 * (alpha - 1.0));
}

double divergence_1d_quadrature(DivergenceKind kind, const Scalar1D& a, const Scalar1D& b) {
  const bool renyi = kind.type == DivergenceKind::Type::Renyi;
  if (renyi && (!(kind.alpha > 0.0) || kind.alpha == 1.0))
    throw std::invalid_argument("Renyi order must be positive and different from 1");

  const Chart chart = chart_for(a);
  const bool shared_chart = chart.kind == chart_for(b).kind &&
                            a.support_lower() == b.support_lower() &&
                            a.support_upper() == b.support_upper();
  auto log_a = [&](double s) { return log_density_in_chart(a, chart, s); };
  auto log_b = [&](double s) {
    return shared_chart ? log_density_in_chart(b, chart, s) : b.log_density(chart.x(s));
  };

  const double center = chart.s_of(a.median());
  double spread = 0.5 * (chart.s_of(a.quantile(0.75)) - chart.s_of(a.quantile(0.25)));
  if (!(spread > 0.0) || !std::isfinite(spread)) spread = 1.0;

  std::function<double(double)> integrand;
  double shift = 0.0;
  if (renyi) {
    const double alpha = kind.alpha;
    auto log_integrand = [&, alpha](double s) {
      const double la = log_a(s);
      if (la == -kInf) return -kInf;
      const double lb = log_b(s);
      if (lb == -kInf) return alpha > 1.0 ? kInf : -kInf;
      return alpha * la + (1.0 - alpha) * lb + chart.log_jacobian(s);
    };
    shift = -kInf;
    for (int i = -8; i <= 8; ++i) shift = std::max(shift, log_integrand(center + 0.5 * i * spread));
    if (!std::isfinite(shift)) {
      if (shift == kInf) return kInf;
      shift = 0.0;
    }
    integrand = [log_integrand, shift](double s) {
      const double l = log_integrand(s);
      return l == -kInf ? 0.0 : std::exp(l - shift);
    };
  } else {
    integrand = [&](double s) {
      const double la = log_a(s);
      const double mass = std::exp(la + chart.log_jacobian(s));
      if (mass == 0.0) return 0.0;
      const double lb = log_b(s);
      if (lb == -kInf) return kInf;
      return mass * (la - lb);
    };
  }

  if (tail_diverges(integrand, center, spread, +1) || tail_diverges(integrand, center, spread, -1))
    return kInf;
  QuadratureResult r;
  try {
    r = integrate_real_line(integrand, center, spread);
  } catch (const std::exception&) {
    return kInf;
  }
  if (!std::isfinite(r.value)) return kInf;
  if (r.error > std::max(1e-8, 1e-7 * std::abs(r.value)))
    throw std::runtime_error("divergence quadrature did not converge (error estimate " +
                             std::to_string(r.error) + ")");
  if (!renyi) return std::max(r.value, 0.0);
  if (!(r.value > 0.0)) throw std::runtime_error("Renyi quadrature produced a non-positive integral");
  return std::max((shift + std::log(r.value)) / (kind.alpha - 1.0), 0.0);
}

double kl_gaussian_vs_t(double df) {
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  static const auto rule = gauss_hermite(150);
  const auto& [nodes, weights] = rule;
  double expectation = 0.0;
  for (Eigen::Index i = 0; i < nodes.size(); ++i) {
    const double z = std::sqrt(2.0) * nodes(i);
    expectation += weights(i) * std::log1p(z * z / df);
  }
  expectation /= std::sqrt(M_PI);
  const double value = std::lgamma(0.5 * df) - std::lgamma(0.5 * (df + 1.0)) +
                       0.5 * std::log(df) - 0.5 * std::log(2.0 * M_E) +
                       0.5 * (df + 1.0) * expectation;
  return std::max(value, 0.0);
}

double mean_field_gaussian_kl(int dim, double rho) {
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
  if (dim == 1) return 0.0;
  const double d = static_cast<double>(dim);
  if (!(rho > -1.0 / (d - 1.0) && rho < 1.0))
    throw std::invalid_argument("correlation gives a non positive-definite covariance");
  const double log_det_cov = (d - 1.0) * std::log1p(-rho) + std::log1p((d - 1.0) * rho);
  const double precision_diag =
      (1.0 + (d - 2.0) * rho) / ((1.0 - rho) * (1.0 + (d - 1.0) * rho));
  return 0.5 * (d * std::log(precision_diag) + log_det_cov);
}

}  // namespace vibound
