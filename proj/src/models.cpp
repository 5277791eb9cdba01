#include <vibound/models.hpp>
#include <vibound/random.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace vibound {

namespace {

const double kHalfLogTwoPi = 0.5 * std::log(2.0 * M_PI);

double normal_log_density(double x, double loc, double sd) {
  const double z = (x - loc) / sd;
  return -0.5 * z * z - std::log(sd) - kHalfLogTwoPi;
}

// Prior terms shared by both eight schools parameterizations: mu ~ N(0, 5),
// tau ~ half-Cauchy(0, 5) with the log-transform Jacobian.
double hyperprior(double mu, double log_tau, double* d_mu, double* d_log_tau) {
  const double tau = std::exp(log_tau);
  const double r = tau / 5.0;
  const double lp = normal_log_density(mu, 0.0, 5.0) + std::log(2.0 / M_PI) - std::log(5.0) -
                    std::log1p(r * r) + log_tau;
  if (d_mu) *d_mu = -mu / 25.0;
  if (d_log_tau) *d_log_tau = -2.0 * r * r / (1.0 + r * r) + 1.0;
  return lp;
}

void check_eight_schools(const EightSchoolsData& data) {
  if (data.y.size() == 0 || data.y.size() != data.sigma.size())
    throw std::invalid_argument("eight schools data: y and sigma must match in length");
  if ((data.sigma.array() <= 0.0).any())
    throw std::invalid_argument("eight schools data: sigma must be positive");
}

std::vector<std::string> eight_schools_names(int n, const std::string& effect) {
  std::vector<std::string> names{"mu", "log_tau"};
  for (int i = 1; i <= n; ++i) names.push_back(effect + "_" + std::to_string(i));
  return names;
}

std::vector<CoordinateTransform> eight_schools_transforms(int n) {
  std::vector<CoordinateTransform> t(n + 2, CoordinateTransform::Identity);
  t[1] = CoordinateTransform::Log;
  return t;
}

}  // namespace

Eigen::VectorXd TargetModel::gradient(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd g(dim);
  evaluate(theta, &g);
  return g;
}

Eigen::VectorXd TargetModel::to_constrained(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd out = theta;
  for (std::size_t i = 0; i < transforms.size(); ++i)
    if (transforms[i] == CoordinateTransform::Log) out(i) = std::exp(theta(i));
  return out;
}

EightSchoolsData eight_schools_data() {
  EightSchoolsData data;
  data.y.resize(8);
  data.y << 28, 8, -3, 7, -1, 1, 18, 12;
  data.sigma.resize(8);
  data.sigma << 15, 10, 16, 11, 9, 11, 10, 18;
  return data;
}

EightSchoolsData load_eight_schools_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const auto j = nlohmann::json::parse(in);
  const auto y = j.at("y").get<std::vector<double>>();
  const auto sigma = j.at("sigma").get<std::vector<double>>();
  EightSchoolsData data;
  data.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  data.sigma = Eigen::Map<const Eigen::VectorXd>(sigma.data(),
                                                 static_cast<Eigen::Index>(sigma.size()));
  check_eight_schools(data);
  return data;
}

TargetModel eight_schools_centered(const EightSchoolsData& data) {
  check_eight_schools(data);
  const int n = static_cast<int>(data.y.size());
  TargetModel m;
  m.name = "eight-schools-centered";
  m.dim = n + 2;
  m.transforms = eight_schools_transforms(n);
  m.coordinate_names = eight_schools_names(n, "theta");
  m.evaluate = [data, n](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const double mu = x(0);
    const double log_tau = x(1);
    const double tau = std::exp(log_tau);
    const double inv_tau2 = 1.0 / (tau * tau);
    double d_mu = 0.0;
    double d_log_tau = 0.0;
    double lp = hyperprior(mu, log_tau, &d_mu, &d_log_tau);
    for (int i = 0; i < n; ++i) {
      const double theta = x(i + 2);
      const double dev = theta - mu;
      const double s = data.sigma(i);
      lp += normal_log_density(data.y(i), theta, s);
      lp += -0.5 * dev * dev * inv_tau2 - log_tau - kHalfLogTwoPi;
      if (grad) {
        d_mu += dev * inv_tau2;
        d_log_tau += dev * dev * inv_tau2 - 1.0;
        (*grad)(i + 2) = (data.y(i) - theta) / (s * s) - dev * inv_tau2;
      }
    }
    if (grad) {
      (*grad)(0) = d_mu;
      (*grad)(1) = d_log_tau;
    }
    return lp;
  };
  return m;
}

TargetModel eight_schools_noncentered(const EightSchoolsData& data) {
  check_eight_schools(data);
  const int n = static_cast<int>(data.y.size());
  TargetModel m;
  m.name = "eight-schools-noncentered";
  m.dim = n + 2;
  m.transforms = eight_schools_transforms(n);
  m.coordinate_names = eight_schools_names(n, "theta_tilde");
  m.evaluate = [data, n](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const double mu = x(0);
    const double log_tau = x(1);
    const double tau = std::exp(log_tau);
    double d_mu = 0.0;
    double d_log_tau = 0.0;
    double lp = hyperprior(mu, log_tau, &d_mu, &d_log_tau);
    for (int i = 0; i < n; ++i) {
      const double eta = x(i + 2);
      const double s = data.sigma(i);
      const double resid = data.y(i) - mu - tau * eta;
      lp += normal_log_density(data.y(i), mu + tau * eta, s);
      lp += -0.5 * eta * eta - kHalfLogTwoPi;
      if (grad) {
        const double r = resid / (s * s);
        d_mu += r;
        d_log_tau += r * tau * eta;
        (*grad)(i + 2) = tau * r - eta;
      }
    }
    if (grad) {
      (*grad)(0) = d_mu;
      (*grad)(1) = d_log_tau;
    }
    return lp;
  };
  return m;
}

Eigen::VectorXd noncentered_to_centered(const Eigen::VectorXd& theta) {
  Eigen::VectorXd out = theta;
  const double tau = std::exp(theta(1));
  for (Eigen::Index i = 2; i < theta.size(); ++i) out(i) = theta(0) + tau * theta(i);
  return out;
}

TargetModel robust_regression(const RobustRegressionData& data, double prior_sd,
                              double lik_df) {
  if (data.X.rows() != data.y.size())
    throw std::invalid_argument("robust regression: X and y row counts differ");
  if (prior_sd <= 0.0 || lik_df <= 0.0)
    throw std::invalid_argument("robust regression: prior_sd and lik_df must be positive");
  const int d = static_cast<int>(data.X.cols());
  TargetModel m;
  m.name = "robust-regression";
  m.dim = d;
  m.transforms.assign(d, CoordinateTransform::Identity);
  for (int i = 1; i <= d; ++i) m.coordinate_names.push_back("beta_" + std::to_string(i));
  const double lik_const = std::lgamma(0.5 * (lik_df + 1.0)) - std::lgamma(0.5 * lik_df) -
                           0.5 * std::log(lik_df * M_PI);
  m.evaluate = [data, prior_sd, lik_df, lik_const](const Eigen::VectorXd& x,
                                                   Eigen::VectorXd* grad) {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) lp += normal_log_density(x(i), 0.0, prior_sd);
    if (grad) *grad = -x / (prior_sd * prior_sd);
    const Eigen::VectorXd resid = data.y - data.X * x;
    for (Eigen::Index n = 0; n < resid.size(); ++n) {
      const double r = resid(n);
      lp += lik_const - 0.5 * (lik_df + 1.0) * std::log1p(r * r / lik_df);
      if (grad)
        *grad += ((lik_df + 1.0) / lik_df) * r / (1.0 + r * r / lik_df) *
                 data.X.row(n).transpose();
    }
    return lp;
  };
  return m;
}

RobustRegressionData generate_robust_regression_data(int N, int d, const Eigen::VectorXd& beta,
                                                     double corr, std::uint64_t seed) {
  if (N < 0 || d < 1 || beta.size() != d)
    throw std::invalid_argument("robust regression data: inconsistent sizes");
  if (!(std::abs(corr) < 1.0)) throw std::invalid_argument("correlation must lie in (-1, 1)");
  Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(d, d, corr);
  cov.diagonal().setOnes();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("correlation gives a non positive-definite covariance");
  const Eigen::MatrixXd chol = llt.matrixL();
  constexpr double kLikelihoodDf = 40.0;
  RobustRegressionData data;
  data.X.resize(N, d);
  data.y.resize(N);
  data.true_beta = beta;
  data.corr = corr;
  data.seed = seed;
  for (int n = 0; n < N; ++n) {
    Rng rng(seed, static_cast<std::uint64_t>(n));
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z(i) = rng.normal();
    const Eigen::VectorXd x = chol * z;
    const double noise = rng.normal() / std::sqrt(rng.chi_square(kLikelihoodDf) / kLikelihoodDf);
    data.X.row(n) = x.transpose();
    data.y(n) = x.dot(beta) + noise;
  }
  return data;
}

RobustRegressionData default_robust_regression_data() {
  Eigen::VectorXd beta(2);
  beta << -2.0, 1.0;
  return generate_robust_regression_data(25, 2, beta, 0.75, 1);
}

TargetModel conjugate_gaussian(const ConjugateGaussianSpec& spec) {
  const Eigen::Index d = spec.prior_mean.size();
  if (spec.prior_cov.rows() != d || spec.prior_cov.cols() != d)
    throw std::invalid_argument("conjugate model: prior covariance has wrong shape");
  if (spec.design.cols() != d || spec.design.rows() != spec.y.size())
    throw std::invalid_argument("conjugate model: design has wrong shape");
  if (spec.noise_sd <= 0.0) throw std::invalid_argument("conjugate model: noise_sd must be positive");
  Eigen::LLT<Eigen::MatrixXd> prior_llt(spec.prior_cov);
  if (prior_llt.info() != Eigen::Success)
    throw std::invalid_argument("conjugate model: prior covariance is not positive definite");

  const double s2 = spec.noise_sd * spec.noise_sd;
  const Eigen::MatrixXd prior_prec = prior_llt.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd post_prec = prior_prec + spec.design.transpose() * spec.design / s2;
  Eigen::LLT<Eigen::MatrixXd> post_llt(post_prec);
  ExactPosterior exact;
  exact.cov = post_llt.solve(Eigen::MatrixXd::Identity(d, d));
  exact.mean = post_llt.solve(prior_prec * spec.prior_mean +
                              spec.design.transpose() * spec.y / s2);

  const Eigen::Index n = spec.y.size();
  const Eigen::MatrixXd marg_cov =
      spec.design * spec.prior_cov * spec.design.transpose() +
      s2 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd marg_resid = spec.y - spec.design * spec.prior_mean;
  if (n > 0) {
    Eigen::LLT<Eigen::MatrixXd> marg_llt(marg_cov);
    const Eigen::MatrixXd lm = marg_llt.matrixL();
    const Eigen::VectorXd z = lm.triangularView<Eigen::Lower>().solve(marg_resid);
    exact.log_evidence = -0.5 * z.squaredNorm() - lm.diagonal().array().log().sum() -
                         static_cast<double>(n) * kHalfLogTwoPi;
  }

  const Eigen::MatrixXd prior_l = prior_llt.matrixL();
  const double prior_const = -prior_l.diagonal().array().log().sum() -
                             static_cast<double>(d) * kHalfLogTwoPi;
  const double lik_const = -static_cast<double>(n) * (std::log(spec.noise_sd) + kHalfLogTwoPi);

  TargetModel m;
  m.name = "conjugate";
  m.dim = static_cast<int>(d);
  m.transforms.assign(d, CoordinateTransform::Identity);
  for (Eigen::Index i = 1; i <= d; ++i) m.coordinate_names.push_back("theta_" + std::to_string(i));
  m.exact = exact;
  m.evaluate = [spec, prior_prec, prior_const, lik_const, s2](const Eigen::VectorXd& x,
                                                             Eigen::VectorXd* grad) {
    const Eigen::VectorXd dev = x - spec.prior_mean;
    const Eigen::VectorXd prec_dev = prior_prec * dev;
    const Eigen::VectorXd resid = spec.y - spec.design * x;
    if (grad) *grad = -prec_dev + spec.design.transpose() * resid / s2;
    return prior_const - 0.5 * dev.dot(prec_dev) + lik_const - 0.5 * resid.squaredNorm() / s2;
  };
  return m;
}

ConjugateGaussianSpec conjugate_fixture(int dim, std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
  constexpr int kObservations = 20;
  ConjugateGaussianSpec spec;
  spec.prior_mean = Eigen::VectorXd::Zero(dim);
  spec.prior_cov = 4.0 * Eigen::MatrixXd::Identity(dim, dim);
  spec.noise_sd = 1.0;
  spec.design.resize(kObservations, dim);
  spec.y.resize(kObservations);
  Rng rng(seed, 0);
  Eigen::VectorXd truth(dim);
  for (int i = 0; i < dim; ++i) truth(i) = rng.normal();
  for (int n = 0; n < kObservations; ++n) {
    const double shared = rng.normal();
    for (int i = 0; i < dim; ++i) spec.design(n, i) = 0.8 * shared + 0.6 * rng.normal();
    spec.y(n) = spec.design.row(n).dot(truth) + rng.normal();
  }
  return spec;
}

TargetModel model_by_name(const std::string& name) {
  if (name == "eight-schools-centered") return eight_schools_centered(eight_schools_data());
  if (name == "eight-schools-noncentered")
    return eight_schools_noncentered(eight_schools_data());
  if (name == "robust-regression") return robust_regression(default_robust_regression_data());
  if (name == "conjugate") return conjugate_gaussian(conjugate_fixture(3, 1));
  throw std::invalid_argument("unknown model: " + name);
}

}  // namespace vibound
