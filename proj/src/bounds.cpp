#include <vibound/bounds.hpp>
#include <vibound/numerics.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vibound {

namespace {

constexpr double kEicStability = 0.375;

// Distances ||theta_t - center|| for draws of q.
Eigen::VectorXd draw_distances(const VariationalDistribution& q, int T, std::uint64_t seed,
                               const Eigen::VectorXd& center) {
  const SampleBatch batch = sample(q, T, seed);
  return (batch.draws.rowwise() - center.transpose()).rowwise().norm();
}

Eigen::VectorXd resolve_center(const VariationalDistribution& q,
                               const std::optional<Eigen::VectorXd>& center) {
  if (!center) return q.loc();
  if (center->size() != q.dim()) throw std::invalid_argument("center has wrong dimension");
  return *center;
}

double top_eigenvalue(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

// E Q^k for Q = sum_i lambda_i Z_i^2, from the cumulants
// kappa_n = 2^(n-1) (n-1)! sum_i lambda_i^n.
double gaussian_quadratic_form_moment(const Eigen::VectorXd& eigenvalues, int k) {
  std::vector<double> kappa(k + 1, 0.0);
  double factorial = 1.0;
  for (int n = 1; n <= k; ++n) {
    if (n > 1) factorial *= static_cast<double>(n - 1);
    kappa[n] = std::pow(2.0, n - 1) * factorial * eigenvalues.array().pow(n).sum();
  }
  std::vector<double> m(k + 1, 0.0);
  m[0] = 1.0;
  for (int n = 1; n <= k; ++n) {
    double binom = 1.0;
    for (int j = 0; j < n; ++j) {
      m[n] += binom * kappa[j + 1] * m[n - 1 - j];
      binom = binom * static_cast<double>(n - 1 - j) / static_cast<double>(j + 1);
    }
  }
  return m[k];
}

MomentConstant infinite_constant(MomentConstant c, std::string note) {
  c.value = kInf;
  c.note = std::move(note);
  return c;
}

}  // namespace

std::string to_string(MomentConstant::Kind kind) {
  return kind == MomentConstant::Kind::PolyPIC ? "pic" : "eic";
}

std::string to_string(MomentConstant::Method method) {
  return method == MomentConstant::Method::Analytic ? "analytic" : "monte_carlo";
}

std::string to_string(BoundMethod method) {
  switch (method) {
    case BoundMethod::PI: return "pi";
    case BoundMethod::EI: return "ei";
    case BoundMethod::PolyQ: return "poly_q";
    case BoundMethod::SqrtEI: return "sqrt_ei";
    case BoundMethod::EI2p: return "ei_2p";
  }
  return "unknown";
}

std::optional<double> norm_moment_analytic(const VariationalDistribution& q, int power) {
  if (power < 2 || power % 2 != 0) return std::nullopt;
  const int k = power / 2;
  const double h = q.df();
  if (q.kind() == VariationalKind::MeanFieldT) {
    if (power > 4) return std::nullopt;
    if (h <= power) return kInf;
    const Eigen::ArrayXd s2 = q.scale().array().square();
    const double c = h / (h - 2.0);
    if (power == 2) return c * s2.sum();
    const Eigen::ArrayXd second = c * s2;
    const Eigen::ArrayXd fourth = 3.0 * s2.square() * h * h / ((h - 2.0) * (h - 4.0));
    return fourth.sum() + second.sum() * second.sum() - second.square().sum();
  }
  const Eigen::MatrixXd l = q.factor();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(l * l.transpose(),
                                                        Eigen::EigenvaluesOnly);
  const Eigen::VectorXd eig = solver.eigenvalues().cwiseMax(0.0);
  const double gaussian = gaussian_quadratic_form_moment(eig, k);
  if (!q.is_t()) return gaussian;
  if (h <= power) return kInf;
  // E (h / V)^k for V ~ chi-square(h).
  const double mixing = std::exp(k * std::log(h) - k * std::log(2.0) +
                                 std::lgamma(0.5 * h - k) - std::lgamma(0.5 * h));
  return gaussian * mixing;
}

MomentConstant pic_analytic(const VariationalDistribution& q, int p) {
  if (p != 2 && p != 4) throw std::invalid_argument("analytic PIC supports p = 2 or 4");
  MomentConstant c;
  c.kind = MomentConstant::Kind::PolyPIC;
  c.method = MomentConstant::Method::Analytic;
  c.p = p;
  c.center = q.loc();
  const double m = *norm_moment_analytic(q, p);
  if (!std::isfinite(m))
    return infinite_constant(c, "t family with df <= " + std::to_string(p) +
                                    " has no finite moment of order " + std::to_string(p));
  c.value = 2.0 * std::pow(m, 1.0 / p);
  return c;
}

MomentConstant pic_best_available(const VariationalDistribution& q, int p, int T,
                                  std::uint64_t seed) {
  if ((p == 2 || p == 4) && norm_moment_analytic(q, p)) return pic_analytic(q, p);
  return pic_monte_carlo(q, p, T, seed);
}

NormMoment norm_moment_monte_carlo(const VariationalDistribution& q, double power, int T,
                                   std::uint64_t seed,
                                   const std::optional<Eigen::VectorXd>& center) {
  if (T < 2) throw std::invalid_argument("need T >= 2");
  const Eigen::VectorXd r = draw_distances(q, T, seed, resolve_center(q, center));
  const Eigen::VectorXd m = r.array().pow(power).matrix();
  const std::span<const double> ms(m.data(), static_cast<std::size_t>(m.size()));
  return {mean(ms), std::sqrt(sample_variance(ms) / static_cast<double>(T))};
}

MomentConstant pic_monte_carlo(const VariationalDistribution& q, double p, int T,
                               std::uint64_t seed, const std::optional<Eigen::VectorXd>& center) {
  if (T < 100) throw std::invalid_argument("Monte Carlo PIC needs T >= 100");
  if (!(p >= 1.0)) throw std::invalid_argument("PIC order must be at least 1");
  MomentConstant c;
  c.kind = MomentConstant::Kind::PolyPIC;
  c.method = MomentConstant::Method::MonteCarlo;
  c.p = p;
  c.center = resolve_center(q, center);
  c.T = T;
  c.seed = seed;
  if (q.is_t() && q.df() <= p)
    return infinite_constant(c, "t family with df <= p has no finite moment of order p");
  const NormMoment m = norm_moment_monte_carlo(q, p, T, seed, c.center);
  c.value = 2.0 * std::pow(m.value, 1.0 / p);
  c.mc_error = 2.0 / p * std::pow(m.value, 1.0 / p - 1.0) * m.mc_error;
  return c;
}

double gaussian_log_mgf_squared_norm(const Eigen::MatrixXd& cov, double eps) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  double total = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double a = 1.0 - 2.0 * eps * std::max(solver.eigenvalues()(i), 0.0);
    if (a <= 0.0) return kInf;
    total -= 0.5 * std::log(a);
  }
  return total;
}

double eic_stable_epsilon_limit(const VariationalDistribution& q) {
  if (q.is_t()) return 0.0;
  return kEicStability / top_eigenvalue(moments(q).cov);
}

namespace {

MomentConstant eic_from_distances(const VariationalDistribution& q, double p, double eps,
                                  const Eigen::VectorXd& distances, int T, std::uint64_t seed,
                                  const Eigen::VectorXd& center) {
  MomentConstant c;
  c.kind = MomentConstant::Kind::ExpEIC;
  c.method = MomentConstant::Method::MonteCarlo;
  c.p = p;
  c.epsilon = eps;
  c.center = center;
  c.T = T;
  c.seed = seed;
  if (q.is_t())
    return infinite_constant(c, "t family has no finite exponential moments");
  if (p > 2.0)
    return infinite_constant(c, "Gaussian family has no finite exponential moment of order p > 2");
  const Eigen::VectorXd scaled = eps * distances.array().pow(p).matrix();
  const std::span<const double> s(scaled.data(), static_cast<std::size_t>(scaled.size()));
  const double log_mgf = log_mean_exp(s);
  const double top = scaled.maxCoeff();
  const Eigen::VectorXd a = (scaled.array() - top).exp().matrix();
  const std::span<const double> as(a.data(), static_cast<std::size_t>(a.size()));
  const double log_mgf_error =
      std::sqrt(sample_variance(as) / static_cast<double>(a.size())) / mean(as);
  const double inner = (1.5 + log_mgf) / eps;
  c.log_mgf = log_mgf;
  c.log_mgf_error = log_mgf_error;
  c.value = 2.0 * std::pow(inner, 1.0 / p);
  c.mc_error = c.value / (p * (1.5 + log_mgf)) * log_mgf_error;
  return c;
}

}  // namespace

MomentConstant eic_monte_carlo(const VariationalDistribution& q, double p, double eps, int T,
                               std::uint64_t seed, const std::optional<Eigen::VectorXd>& center) {
  if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(p >= 1.0)) throw std::invalid_argument("EIC order must be at least 1");
  if (T < 100) throw std::invalid_argument("Monte Carlo EIC needs T >= 100");
  const Eigen::VectorXd c = resolve_center(q, center);
  if (!q.is_t() && p == 2.0 && eps >= eic_stable_epsilon_limit(q))
    throw std::domain_error("epsilon too large for a stable exponential-moment estimate; use "
                            "epsilon below " + std::to_string(eic_stable_epsilon_limit(q)));
  if (q.is_t() || p > 2.0) return eic_from_distances(q, p, eps, Eigen::VectorXd(), T, seed, c);
  return eic_from_distances(q, p, eps, draw_distances(q, T, seed, c), T, seed, c);
}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0 && hi >= lo) || n < 1) throw std::invalid_argument("invalid grid");
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    grid[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }
  return grid;
}

EICScan eic_scan(const VariationalDistribution& q, double p, int T, std::uint64_t seed,
                 int points) {
  EICScan scan;
  const Eigen::VectorXd center = q.loc();
  if (q.is_t() || p > 2.0) {
    scan.epsilons = {1.0};
    scan.constants = {eic_from_distances(q, p, 1.0, Eigen::VectorXd(), T, seed, center)};
    return scan;
  }
  const Eigen::VectorXd distances = draw_distances(q, T, seed, center);
  double hi;
  if (p == 2.0) {
    hi = 0.99 * eic_stable_epsilon_limit(q);
  } else {
    const double typical = distances.array().pow(p).mean();
    hi = 10.0 / typical;
  }
  scan.epsilons = log_grid(hi * 1e-3, hi, points);
  for (double eps : scan.epsilons)
    scan.constants.push_back(eic_from_distances(q, p, eps, distances, T, seed, center));
  for (std::size_t i = 1; i < scan.constants.size(); ++i)
    if (scan.constants[i].value < scan.constants[scan.best].value) scan.best = i;
  return scan;
}

LogMgfScan log_mgf_scan(const VariationalDistribution& q, double power,
                        const std::vector<double>& epsilons, int T, std::uint64_t seed) {
  LogMgfScan scan;
  scan.epsilons = epsilons;
  scan.log_mgf.assign(epsilons.size(), kInf);
  if (q.is_t() || power > 2.0) return scan;
  const double limit = power == 2.0 ? eic_stable_epsilon_limit(q) : kInf;
  const Eigen::VectorXd r = draw_distances(q, T, seed, q.loc()).array().pow(power).matrix();
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (epsilons[i] >= limit) continue;
    const Eigen::VectorXd scaled = epsilons[i] * r;
    scan.log_mgf[i] =
        log_mean_exp(std::span<const double>(scaled.data(), static_cast<std::size_t>(scaled.size())));
  }
  return scan;
}

DivergenceBound divergence_bound(const ObjectiveEstimate& cubo, const ObjectiveEstimate& elbo) {
  if (cubo.kind != Objective::CUBO) throw std::invalid_argument("first estimate must be a CUBO");
  if (elbo.kind != Objective::ELBO) throw std::invalid_argument("second estimate must be an ELBO");
  DivergenceBound b;
  b.alpha = cubo.alpha;
  b.cubo = cubo;
  b.elbo = elbo;
  const double factor = b.alpha / (b.alpha - 1.0);
  const double spread = std::hypot(cubo.mc_std_error, elbo.mc_std_error);
  const double rounding = 1e-9 * std::max(1.0, std::abs(elbo.value));
  if (cubo.value < elbo.value - 6.0 * spread - rounding)
    throw std::domain_error("estimator inconsistency: CUBO is below ELBO by more than six "
                            "combined standard errors");
  b.delta_bar = factor * (cubo.value - elbo.value);
  b.combined_mc_error = factor * spread;
  return b;
}

WassersteinBound wasserstein_bound_pi(const MomentConstant& pic_2p, double delta, double p) {
  if (pic_2p.kind != MomentConstant::Kind::PolyPIC || pic_2p.p != 2.0 * p)
    throw std::invalid_argument("PI bound needs the PIC of order 2p");
  WassersteinBound w;
  w.method = BoundMethod::PI;
  w.p = p;
  w.alpha = 2.0;
  w.inputs = {{"pic_2p", pic_2p.value}, {"delta", delta}};
  if (!std::isfinite(pic_2p.value) || !std::isfinite(delta)) {
    w.value = kInf;
    w.note = pic_2p.note.empty() ? "infinite input" : pic_2p.note;
    return w;
  }
  w.value = pic_2p.value * std::pow(std::expm1(std::max(delta, 0.0)), 1.0 / (2.0 * p));
  return w;
}

WassersteinBound wasserstein_bound_pi(const MomentConstant& pic_2p, const DivergenceBound& delta,
                                      double p) {
  if (delta.alpha != 2.0) throw std::invalid_argument("PI bound needs a 2-divergence bound");
  return wasserstein_bound_pi(pic_2p, delta.delta_bar, p);
}

WassersteinBound wasserstein_bound_ei(const MomentConstant& eic_p, double kl_bound, double p) {
  WassersteinBound w;
  w.method = BoundMethod::EI;
  w.p = p;
  w.inputs = {{"eic_p", eic_p.value}, {"kl", kl_bound}, {"epsilon", eic_p.epsilon}};
  if (!std::isfinite(eic_p.value) || !std::isfinite(kl_bound)) {
    w.value = kInf;
    w.note = eic_p.note.empty() ? "infinite input" : eic_p.note;
    return w;
  }
  const double kl = std::max(kl_bound, 0.0);
  w.value = eic_p.value * (std::pow(kl, 1.0 / p) + std::pow(0.5 * kl, 1.0 / (2.0 * p)));
  return w;
}

WassersteinBound wasserstein_bound_poly_q(double alpha, const PolyMoments& moments,
                                          double d_alpha_bound, double kl_bound, double p) {
  if (!(alpha > 1.0)) throw std::invalid_argument("alpha must exceed 1");
  const double q = alpha / (alpha - 1.0);
  WassersteinBound w;
  w.method = BoundMethod::PolyQ;
  w.p = p;
  w.alpha = alpha;
  w.inputs = {{"moment_2p", moments.moment_2p},
              {"moment_2pq", moments.moment_2pq},
              {"d_alpha", d_alpha_bound},
              {"kl", kl_bound}};
  if (!std::isfinite(moments.moment_2p) || !std::isfinite(moments.moment_2pq) ||
      !std::isfinite(d_alpha_bound) || !std::isfinite(kl_bound)) {
    w.value = kInf;
    w.note = "infinite moment or divergence input";
    return w;
  }
  const double inner = moments.moment_2pq / (std::pow(2.0, 2.0 * q - 2.0) * q) +
                       4.0 * std::exp((alpha - 1.0) * d_alpha_bound) / alpha;
  const double c = std::pow(std::sqrt(moments.moment_2p) + std::sqrt(inner), 1.0 / p);
  w.inputs["constant"] = c;
  w.value = 2.0 * c * std::pow(std::max(kl_bound, 0.0), 1.0 / (2.0 * p));
  return w;
}

WassersteinBound wasserstein_bound_sqrt_ei(double alpha, double log_mgf, double d_alpha_bound,
                                           double kl_bound, double p, double eps) {
  if (!(alpha > 1.0)) throw std::invalid_argument("alpha must exceed 1");
  if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
  WassersteinBound w;
  w.method = BoundMethod::SqrtEI;
  w.p = p;
  w.alpha = alpha;
  w.inputs = {{"log_mgf", log_mgf}, {"d_alpha", d_alpha_bound}, {"kl", kl_bound},
              {"epsilon", eps}};
  if (!std::isfinite(log_mgf) || !std::isfinite(d_alpha_bound) || !std::isfinite(kl_bound)) {
    w.value = kInf;
    w.note = "infinite exponential moment or divergence input";
    return w;
  }
  const double r = alpha / (alpha - 1.0);
  const double bracket = 27.0 * r * r + 18.0 + 5.0 * log_mgf * log_mgf +
                         3.0 * d_alpha_bound * d_alpha_bound;
  const double c = std::pow(std::pow(2.0, p) / (eps * eps) * bracket, 1.0 / p);
  w.inputs["constant"] = c;
  w.value = c * std::pow(std::max(kl_bound, 0.0), 1.0 / (2.0 * p));
  return w;
}

WassersteinBound wasserstein_bound_sqrt_ei(double alpha, const LogMgfScan& scan,
                                           double d_alpha_bound, double kl_bound, double p) {
  WassersteinBound best;
  best.method = BoundMethod::SqrtEI;
  best.p = p;
  best.alpha = alpha;
  best.value = kInf;
  best.note = "no finite exponential moment on the epsilon grid";
  for (std::size_t i = 0; i < scan.epsilons.size(); ++i) {
    const auto w = wasserstein_bound_sqrt_ei(alpha, scan.log_mgf[i], d_alpha_bound, kl_bound, p,
                                             scan.epsilons[i]);
    if (w.value < best.value) best = w;
  }
  return best;
}

WassersteinBound wasserstein_bound_ei2p(const LogMgfScan& scan, double kl_bound, double p) {
  WassersteinBound w;
  w.method = BoundMethod::EI2p;
  w.p = p;
  w.value = kInf;
  w.inputs = {{"kl", kl_bound}};
  double best_c = kInf;
  double best_eps = 0.0;
  for (std::size_t i = 0; i < scan.epsilons.size(); ++i) {
    if (!std::isfinite(scan.log_mgf[i])) continue;
    const double c = 2.0 * std::pow((1.0 + scan.log_mgf[i]) / (2.0 * scan.epsilons[i]),
                                    1.0 / (2.0 * p));
    if (c < best_c) {
      best_c = c;
      best_eps = scan.epsilons[i];
    }
  }
  if (!std::isfinite(best_c) || !std::isfinite(kl_bound)) {
    w.note = "no finite exponential moment of order 2p on the epsilon grid";
    return w;
  }
  w.inputs["constant"] = best_c;
  w.inputs["epsilon"] = best_eps;
  w.value = best_c * std::pow(std::max(kl_bound, 0.0), 1.0 / (2.0 * p));
  return w;
}

SummaryErrorBounds summary_error_bounds(std::optional<double> w1, std::optional<double> w2,
                                        double S) {
  if (!w1 && !w2) throw std::invalid_argument("need at least one Wasserstein bound");
  if (!(S >= 0.0)) throw std::invalid_argument("S must be non-negative");
  SummaryErrorBounds b;
  b.S = S;
  const double first = w1.value_or(kInf);
  const double second = w2.value_or(kInf);
  const double m = std::min(first, second);
  b.mean_bound = m;
  b.mad_bound = 2.0 * m;
  b.std_bound = second;
  b.cov_bound = std::isfinite(second) ? 2.0 * second * (S + second) : kInf;
  return b;
}

double predictive_bound(double lipschitz, double w_p, double p) {
  if (!(lipschitz >= 0.0)) throw std::invalid_argument("Lipschitz constant must be non-negative");
  if (!(p >= 1.0)) throw std::invalid_argument("p must be at least 1");
  if (lipschitz == 0.0) return 0.0;
  return lipschitz * w_p;
}

}  // namespace vibound
