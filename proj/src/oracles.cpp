#include <vibound/numerics.hpp>
#include <vibound/oracles.hpp>
#include <vibound/parallel.hpp>
#include <vibound/random.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace vibound {

double wasserstein_1d(const Scalar1D& a, const Scalar1D& b, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("Wasserstein order must be at least 1");
  if (!a.has_finite_moment(p) || !b.has_finite_moment(p)) return kInf;
  const auto r = integrate_unit_interval([&](double u, double uc) {
    double qa;
    double qb;
    if (uc > 0.0) {
      qa = a.upper_quantile(uc);
      qb = b.upper_quantile(uc);
    } else {
      qa = a.quantile(u);
      qb = b.quantile(u);
    }
    if (qa == qb) return 0.0;
    return std::pow(std::abs(qa - qb), p);
  }, 1e-12);
  if (!std::isfinite(r.value)) return kInf;
  return std::pow(std::max(r.value, 0.0), 1.0 / p);
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a, const char* what) {
  if (a.rows() != a.cols()) throw std::invalid_argument(std::string(what) + " is not square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (a + a.transpose()));
  const Eigen::VectorXd eig = solver.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, eig.cwiseAbs().maxCoeff());
  if (eig.minCoeff() < -tol)
    throw std::invalid_argument(std::string(what) + " is not positive semi-definite");
  return solver.eigenvectors() * eig.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         solver.eigenvectors().transpose();
}

}  // namespace

double wasserstein_gaussian(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1,
                            const Eigen::VectorXd& mu2, const Eigen::MatrixXd& cov2) {
  const Eigen::Index d = mu1.size();
  if (mu2.size() != d || cov1.rows() != d || cov2.rows() != d)
    throw std::invalid_argument("dimension mismatch");
  psd_sqrt(cov1, "first covariance");
  const Eigen::MatrixXd root2 = psd_sqrt(cov2, "second covariance");
  const Eigen::MatrixXd cross = psd_sqrt(root2 * cov1 * root2, "cross term");
  const double w2sq = (mu1 - mu2).squaredNorm() + cov1.trace() + cov2.trace() - 2.0 * cross.trace();
  return std::sqrt(std::max(w2sq, 0.0));
}

std::string to_string(GroundTruthMethod method) {
  switch (method) {
    case GroundTruthMethod::ClosedForm: return "closed_form";
    case GroundTruthMethod::Quadrature: return "quadrature";
    case GroundTruthMethod::ReferenceMCMC: return "reference_mcmc";
  }
  return "unknown";
}

GroundTruth ground_truth_closed_form(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  GroundTruth g;
  g.method = GroundTruthMethod::ClosedForm;
  g.mean = mean;
  g.cov = cov;
  g.std = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  g.mad = g.std * std::sqrt(2.0 / M_PI);
  g.spectral_scale = std::sqrt(symmetric_spectral_norm(cov));
  return g;
}

namespace {

Eigen::MatrixXd numeric_hessian(const TargetModel& target, const Eigen::VectorXd& x) {
  const int d = target.dim;
  Eigen::MatrixXd h(d, d);
  for (int j = 0; j < d; ++j) {
    const double step = 1e-5 * std::max(1.0, std::abs(x(j)));
    Eigen::VectorXd up = x;
    Eigen::VectorXd down = x;
    up(j) += step;
    down(j) -= step;
    h.col(j) = (target.gradient(up) - target.gradient(down)) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

Eigen::VectorXd find_mode(const TargetModel& target) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(target.dim);
  double lp = target.log_density(x);
  if (!std::isfinite(lp)) throw std::runtime_error("log density is not finite at the origin");
  for (int iter = 0; iter < 500; ++iter) {
    const Eigen::VectorXd g = target.gradient(x);
    if (g.norm() < 1e-10 * std::max(1.0, std::abs(lp))) break;
    const Eigen::MatrixXd h = numeric_hessian(target, x);
    Eigen::LLT<Eigen::MatrixXd> llt(-h);
    Eigen::VectorXd dir = llt.info() == Eigen::Success ? Eigen::VectorXd(llt.solve(g)) : g;
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Eigen::VectorXd trial = x + t * dir;
      const double lt = target.log_density(trial);
      if (std::isfinite(lt) && lt >= lp) {
        moved = (trial - x).norm() > 0.0;
        x = trial;
        lp = lt;
        break;
      }
    }
    if (!moved) break;
  }
  return x;
}

struct GridMoments {
  double total = 0.0;
  double boundary = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd second;
  Eigen::VectorXd mad;
};

GridMoments grid_moments(const TargetModel& target, const Eigen::VectorXd& mode,
                         double lp_mode, const Eigen::MatrixXd& whitening, double half_width,
                         double step) {
  const int d = target.dim;
  const long n = 2 * static_cast<long>(std::llround(half_width / step)) + 1;
  long total_points = 1;
  for (int i = 0; i < d; ++i) total_points *= n;
  auto point = [&](long idx, bool* edge) {
    Eigen::VectorXd z(d);
    long rest = idx;
    for (int i = 0; i < d; ++i) {
      const long k = rest % n;
      rest /= n;
      z(i) = -half_width + static_cast<double>(k) * step;
      if (edge && (k == 0 || k == n - 1)) *edge = true;
    }
    return Eigen::VectorXd(mode + whitening * z);
  };
  std::vector<double> weights(total_points);
  parallel_for(static_cast<std::size_t>(total_points), [&](std::size_t idx) {
    const double lp = target.log_density(point(static_cast<long>(idx), nullptr));
    weights[idx] = std::isfinite(lp) ? std::exp(lp - lp_mode) : 0.0;
  });
  GridMoments g;
  g.mean = Eigen::VectorXd::Zero(d);
  g.second = Eigen::MatrixXd::Zero(d, d);
  for (long i = 0; i < total_points; ++i) {
    bool edge = false;
    const Eigen::VectorXd theta = point(i, &edge);
    g.total += weights[i];
    if (edge) g.boundary += weights[i];
    g.mean += weights[i] * theta;
  }
  g.mean /= g.total;
  g.mad = Eigen::VectorXd::Zero(d);
  for (long i = 0; i < total_points; ++i) {
    if (weights[i] == 0.0) continue;
    const Eigen::VectorXd c = point(i, nullptr) - g.mean;
    g.second += weights[i] * c * c.transpose();
    g.mad += weights[i] * c.cwiseAbs();
  }
  g.second /= g.total;
  g.mad /= g.total;
  return g;
}

}  // namespace

GroundTruth quadrature_posterior_moments(const TargetModel& target,
                                         const QuadratureConfig& config) {
  if (target.dim < 1 || target.dim > 2)
    throw std::invalid_argument("quadrature moments support dimension 1 or 2");
  const Eigen::VectorXd mode = find_mode(target);
  const double lp_mode = target.log_density(mode);
  const Eigen::MatrixXd h = numeric_hessian(target, mode);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(-h);
  if (solver.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error("log density is not locally concave at the mode");
  const Eigen::MatrixXd whitening =
      solver.eigenvectors() * solver.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal();

  double half_width = config.half_width;
  double step = config.step;
  GridMoments g = grid_moments(target, mode, lp_mode, whitening, half_width, step);
  int expansions = 0;
  while (g.boundary > config.boundary_mass * g.total) {
    if (++expansions > config.max_refinements)
      throw std::runtime_error("quadrature grid extent did not converge");
    half_width *= 2.0;
    g = grid_moments(target, mode, lp_mode, whitening, half_width, step);
  }
  for (int r = 0;; ++r) {
    if (r >= config.max_refinements)
      throw std::runtime_error("quadrature grid resolution did not converge");
    step *= 0.5;
    GridMoments finer = grid_moments(target, mode, lp_mode, whitening, half_width, step);
    const double scale = std::sqrt(finer.second.diagonal().maxCoeff());
    const double change = std::max((finer.mean - g.mean).cwiseAbs().maxCoeff() / scale,
                                   (finer.second - g.second).cwiseAbs().maxCoeff() / (scale * scale));
    g = std::move(finer);
    if (change < config.tolerance) break;
  }

  GroundTruth truth = ground_truth_closed_form(g.mean, g.second);
  truth.method = GroundTruthMethod::Quadrature;
  truth.mad = g.mad;
  const double cell = std::pow(step, target.dim) * std::abs(whitening.determinant());
  truth.log_normalizer = lp_mode + std::log(g.total * cell);
  return truth;
}

GroundTruth reference_sampler(const TargetModel& target, const ReferenceSamplerConfig& config,
                              const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& report) {
  if (config.steps < 1 || config.burn_in < 0 || config.chains < 1 || config.thin < 1)
    throw std::invalid_argument("invalid reference sampler configuration");
  const int d = target.dim;
  const Eigen::VectorXd start = config.init.value_or(Eigen::VectorXd::Zero(d));
  if (start.size() != d) throw std::invalid_argument("initial point has wrong dimension");
  constexpr double kTargetAcceptance = 0.234;
  constexpr long kAdaptBatch = 100;

  struct ChainOutput {
    std::vector<Eigen::VectorXd> kept;
    long accepted = 0;
    long proposed = 0;
  };
  std::vector<ChainOutput> outputs(config.chains);

  parallel_for(static_cast<std::size_t>(config.chains), [&](std::size_t c) {
    Rng rng(config.seed, c);
    ChainOutput& out = outputs[c];
    Eigen::VectorXd x = start;
    for (int i = 0; i < d; ++i) x(i) += 0.1 * rng.normal();
    double lp = target.log_density(x);
    if (!std::isfinite(lp)) throw std::runtime_error("reference sampler start has zero density");
    double log_lambda = std::log(2.38 / std::sqrt(static_cast<double>(d)));
    Eigen::VectorXd sd = Eigen::VectorXd::Ones(d);
    Eigen::VectorXd run_mean = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd run_m2 = Eigen::VectorXd::Zero(d);
    long run_n = 0;
    long batch_accepted = 0;
    long batch_index = 0;
    const long total = config.burn_in + config.steps;
    Eigen::VectorXd proposal(d);
    for (long step = 0; step < total; ++step) {
      const bool adapting = step < config.burn_in;
      const double lambda = std::exp(log_lambda);
      for (int i = 0; i < d; ++i) proposal(i) = x(i) + lambda * sd(i) * rng.normal();
      const double lq = target.log_density(proposal);
      const bool accept = std::isfinite(lq) && std::log(rng.uniform()) < lq - lp;
      if (accept) {
        x = proposal;
        lp = lq;
      }
      if (adapting) {
        batch_accepted += accept;
        if (step >= config.burn_in / 4) {
          ++run_n;
          const Eigen::VectorXd delta = x - run_mean;
          run_mean += delta / static_cast<double>(run_n);
          run_m2 += delta.cwiseProduct(x - run_mean);
        }
        if ((step + 1) % kAdaptBatch == 0) {
          ++batch_index;
          const double rate = static_cast<double>(batch_accepted) / kAdaptBatch;
          log_lambda += (rate - kTargetAcceptance) * std::min(0.5, 5.0 / std::sqrt(batch_index));
          batch_accepted = 0;
          if (run_n > 10 * d + 100)
            sd = (run_m2 / static_cast<double>(run_n - 1)).cwiseSqrt().cwiseMax(1e-8);
        }
      } else {
        ++out.proposed;
        out.accepted += accept;
        if ((step - config.burn_in) % config.thin == 0) out.kept.push_back(report ? report(x) : x);
      }
    }
  });

  const int rd = static_cast<int>(outputs[0].kept.at(0).size());
  long count = 0;
  long accepted = 0;
  long proposed = 0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(rd);
  for (const auto& o : outputs) {
    for (const auto& v : o.kept) mean += v;
    count += static_cast<long>(o.kept.size());
    accepted += o.accepted;
    proposed += o.proposed;
  }
  mean /= static_cast<double>(count);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(rd, rd);
  Eigen::VectorXd mad = Eigen::VectorXd::Zero(rd);
  for (const auto& o : outputs)
    for (const auto& v : o.kept) {
      const Eigen::VectorXd c = v - mean;
      cov += c * c.transpose();
      mad += c.cwiseAbs();
    }
  cov /= static_cast<double>(count - 1);
  mad /= static_cast<double>(count);

  constexpr int kBatches = 25;
  Eigen::VectorXd var_sum = Eigen::VectorXd::Zero(rd);
  for (const auto& o : outputs) {
    const long n = static_cast<long>(o.kept.size());
    const long size = n / kBatches;
    if (size < 1) throw std::runtime_error("too few kept draws for batch means");
    Eigen::MatrixXd batch_means(kBatches, rd);
    for (int b = 0; b < kBatches; ++b) {
      Eigen::VectorXd s = Eigen::VectorXd::Zero(rd);
      for (long i = b * size; i < (b + 1) * size; ++i) s += o.kept[i];
      batch_means.row(b) = (s / static_cast<double>(size)).transpose();
    }
    const Eigen::RowVectorXd centre = batch_means.colwise().mean();
    const Eigen::VectorXd var =
        ((batch_means.rowwise() - centre).array().square().colwise().sum() / (kBatches - 1))
            .transpose();
    var_sum += var / static_cast<double>(kBatches);
  }

  GroundTruth truth = ground_truth_closed_form(mean, cov);
  truth.method = GroundTruthMethod::ReferenceMCMC;
  truth.mad = mad;
  truth.mc_error = var_sum.cwiseSqrt() / static_cast<double>(config.chains);
  truth.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(proposed);
  truth.acceptance_warning = truth.acceptance_rate < 0.05 || truth.acceptance_rate > 0.6;
  return truth;
}

ErrorMetrics error_metrics(const GroundTruth& truth, const Moments& approx,
                           const std::optional<WeightedMoments>& psis) {
  if (approx.mean.size() != truth.mean.size())
    throw std::invalid_argument("dimension mismatch");
  ErrorMetrics e;
  const Eigen::VectorXd approx_std = approx.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  e.mean_error = (truth.mean - approx.mean).norm();
  e.std_error = (truth.std - approx_std).norm();
  e.cov_error = std::sqrt(symmetric_spectral_norm(truth.cov - approx.cov));
  if (psis) {
    e.psis_mean_error = (truth.mean - psis->mean).norm();
    e.psis_std_error = (truth.std - psis->std).norm();
    e.psis_cov_error = std::sqrt(symmetric_spectral_norm(truth.cov - psis->cov));
  }
  return e;
}

}  // namespace vibound
