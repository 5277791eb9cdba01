#include <vibound/inference.hpp>
#include <vibound/numerics.hpp>
#include <vibound/parallel.hpp>

#include <cmath>
#include <sstream>

namespace vibound {

namespace {

std::string format_point(const Eigen::VectorXd& x) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << ")";
  return os.str();
}

// Gradient of log w_t = log pi*(theta_t) - log q(theta_t) with respect to the
// unconstrained parameters of q, for theta_t = loc + S * noise.
void add_parameter_gradient(const VariationalDistribution& q, const Eigen::VectorXd& target_grad,
                            const Eigen::VectorXd& noise, double weight, Eigen::VectorXd& out) {
  const int d = q.dim();
  out.head(d) += weight * target_grad;
  if (q.is_full_rank()) {
    const Eigen::MatrixXd l = q.factor();
    int k = d;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) {
        out(k++) += weight * (i == j ? target_grad(i) * l(i, i) * noise(i) + 1.0
                                     : target_grad(i) * noise(j));
      }
  } else {
    const Eigen::VectorXd& s = q.scale();
    for (int i = 0; i < d; ++i)
      out(d + i) += weight * (target_grad(i) * s(i) * noise(i) + 1.0);
  }
}

}  // namespace

std::string to_string(Objective objective) {
  return objective == Objective::ELBO ? "elbo" : "cubo";
}

WeightedSample log_importance_weights(const TargetModel& target,
                                      const VariationalDistribution& q, int T,
                                      std::uint64_t seed) {
  if (target.dim != q.dim()) throw std::invalid_argument("target and q dimensions differ");
  WeightedSample ws;
  ws.batch = sample(q, T, seed);
  ws.log_weights.resize(T);
  parallel_for(static_cast<std::size_t>(T), [&](std::size_t t) {
    const auto row = static_cast<Eigen::Index>(t);
    const Eigen::VectorXd theta = ws.batch.draws.row(row).transpose();
    const double lp = target.log_density(theta);
    if (!std::isfinite(lp))
      throw NonFiniteDensityError("non-finite target log density at " + format_point(theta),
                                  theta);
    ws.log_weights(row) = lp - q.log_density_from_noise(ws.batch.base_noise.row(row).transpose());
  });
  return ws;
}

ObjectiveEstimate elbo_from_log_weights(const Eigen::VectorXd& log_weights, std::uint64_t seed) {
  const std::span<const double> lw(log_weights.data(), static_cast<std::size_t>(log_weights.size()));
  ObjectiveEstimate e;
  e.kind = Objective::ELBO;
  e.T = static_cast<int>(log_weights.size());
  e.seed = seed;
  e.value = mean(lw);
  e.mc_std_error = std::sqrt(sample_variance(lw) / static_cast<double>(lw.size()));
  return e;
}

ObjectiveEstimate cubo_from_log_weights(const Eigen::VectorXd& log_weights, double alpha,
                                        std::uint64_t seed) {
  if (!(alpha > 1.0)) throw std::invalid_argument("CUBO order must exceed 1");
  const Eigen::VectorXd scaled = alpha * log_weights;
  const double top = scaled.maxCoeff();
  const Eigen::VectorXd a = (scaled.array() - top).exp().matrix();
  const std::span<const double> as(a.data(), static_cast<std::size_t>(a.size()));
  const double abar = mean(as);
  ObjectiveEstimate e;
  e.kind = Objective::CUBO;
  e.alpha = alpha;
  e.T = static_cast<int>(log_weights.size());
  e.seed = seed;
  e.value = (top + std::log(abar)) / alpha;
  e.mc_std_error =
      std::sqrt(sample_variance(as) / static_cast<double>(as.size())) / (abar * alpha);
  return e;
}

ObjectiveEstimate estimate_elbo(const TargetModel& target, const VariationalDistribution& q,
                                int T, std::uint64_t seed) {
  if (T < 2) throw std::invalid_argument("ELBO estimate needs T >= 2");
  return elbo_from_log_weights(log_importance_weights(target, q, T, seed).log_weights, seed);
}

ObjectiveEstimate estimate_cubo(const TargetModel& target, const VariationalDistribution& q,
                                int T, std::uint64_t seed, double alpha) {
  if (T < 2) throw std::invalid_argument("CUBO estimate needs T >= 2");
  return cubo_from_log_weights(log_importance_weights(target, q, T, seed).log_weights, alpha,
                               seed);
}

namespace {

struct StepEvaluation {
  double objective = 0.0;
  Eigen::VectorXd gradient;
};

StepEvaluation evaluate_step(const TargetModel& target, const VariationalDistribution& q,
                             int T, std::uint64_t seed, Objective objective, double alpha) {
  if (T < 1) throw std::invalid_argument("gradient estimate needs T >= 1");
  if (target.dim != q.dim()) throw std::invalid_argument("target and q dimensions differ");
  const SampleBatch batch = sample(q, T, seed);
  const int d = q.dim();
  Eigen::VectorXd lw(T);
  Eigen::MatrixXd grads(T, d);
  parallel_for(static_cast<std::size_t>(T), [&](std::size_t t) {
    const auto row = static_cast<Eigen::Index>(t);
    const Eigen::VectorXd theta = batch.draws.row(row).transpose();
    Eigen::VectorXd g(d);
    const double lp = target.evaluate(theta, &g);
    if (!std::isfinite(lp) || !g.allFinite())
      throw NonFiniteDensityError(
          "non-finite target log density or gradient at " + format_point(theta), theta);
    lw(row) = lp - q.log_density_from_noise(batch.base_noise.row(row).transpose());
    grads.row(row) = g.transpose();
  });

  Eigen::VectorXd weights(T);
  StepEvaluation out;
  if (objective == Objective::ELBO) {
    weights.setConstant(1.0 / T);
    out.objective = lw.mean();
  } else {
    const Eigen::VectorXd scaled = alpha * lw;
    const double top = scaled.maxCoeff();
    weights = (scaled.array() - top).exp().matrix();
    const double total = weights.sum();
    weights /= total;
    out.objective = (top + std::log(total / T)) / alpha;
  }
  out.gradient = Eigen::VectorXd::Zero(q.num_parameters());
  for (int t = 0; t < T; ++t)
    add_parameter_gradient(q, grads.row(t).transpose(), batch.base_noise.row(t).transpose(),
                           weights(t), out.gradient);
  return out;
}

}  // namespace

Eigen::VectorXd grad_estimate(const TargetModel& target, const VariationalDistribution& q,
                              int T, std::uint64_t seed, Objective objective, double alpha) {
  Eigen::VectorXd g = evaluate_step(target, q, T, seed, objective, alpha).gradient;
  if (!g.allFinite()) throw std::domain_error("non-finite gradient estimate");
  return g;
}

void OptimizerConfig::validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
  if (iterations < 1) throw std::invalid_argument("iterations must be positive");
  if (mc_samples_per_step < 1) throw std::invalid_argument("mc_samples_per_step must be positive");
  if (!(step_decay > 0.0 && step_decay <= 1.0))
    throw std::invalid_argument("step_decay must lie in (0, 1]");
  if (convergence_window < 1) throw std::invalid_argument("convergence_window must be positive");
  if (!(relative_tolerance > 0.0))
    throw std::invalid_argument("relative_tolerance must be positive");
  if (!(smoothing_half_life > 0.0))
    throw std::invalid_argument("smoothing_half_life must be positive");
  if (!(alpha > 1.0)) throw std::invalid_argument("alpha must exceed 1");
}

FitResult fit(const TargetModel& target, const VariationalDistribution& initial,
              Objective objective, const OptimizerConfig& config) {
  config.validate();
  const double sign = objective == Objective::ELBO ? -1.0 : 1.0;
  const double beta1 = 0.9;
  const double beta2 = 0.999;
  const double rms_decay = 0.9;
  const double jitter = 1e-8;
  const double smooth = std::pow(0.5, 1.0 / config.smoothing_half_life);

  VariationalDistribution q = initial;
  Eigen::VectorXd params = q.parameters();
  Eigen::VectorXd first = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd second = Eigen::VectorXd::Zero(params.size());

  FitResult result{initial, objective, {}, false, -1, 0, 0, config};
  result.objective_trace.reserve(config.iterations);
  double ema = 0.0;
  double ema_weight = 0.0;
  double best = kInf;
  Eigen::VectorXd best_params = params;
  const int quarter = std::max(1, config.iterations / 4);
  const int warmup = std::min(config.iterations - 1,
                              static_cast<int>(std::ceil(4.0 * config.smoothing_half_life)));

  for (int k = 0; k < config.iterations; ++k) {
    StepEvaluation step;
    try {
      step = evaluate_step(target, q, config.mc_samples_per_step, derive_seed(config.seed, k),
                           objective, config.alpha);
    } catch (const NonFiniteDensityError& e) {
      throw FitDivergedError(std::string("fit diverged at iteration ") + std::to_string(k) +
                                 ": " + e.what(),
                             result.objective_trace);
    }
    if (!std::isfinite(step.objective) || !step.gradient.allFinite())
      throw FitDivergedError("fit diverged at iteration " + std::to_string(k) +
                                 ": non-finite objective or gradient",
                             result.objective_trace);

    ema = smooth * ema + (1.0 - smooth) * step.objective;
    ema_weight = smooth * ema_weight + (1.0 - smooth);
    const double smoothed = ema / ema_weight;
    result.objective_trace.emplace_back(k, smoothed);
    const double loss = sign * smoothed;
    if (k >= warmup && loss < best) {
      best = loss;
      best_params = params;
      result.best_iteration = k;
    }
    if (!result.converged && k >= 2 * config.convergence_window &&
        (k + 1) % config.convergence_window == 0) {
      const double before = result.objective_trace[k - config.convergence_window].second;
      const double change = std::abs(smoothed - before) / std::max(std::abs(before), 1.0);
      if (change < config.relative_tolerance) {
        result.converged = true;
        result.converged_at = k;
      }
    }

    const Eigen::VectorXd grad = sign * step.gradient;
    const double lr = config.step_size * std::pow(config.step_decay, k / quarter);
    if (config.algorithm == Optimizer::Adam) {
      first = beta1 * first + (1.0 - beta1) * grad;
      second = beta2 * second + (1.0 - beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(beta1, k + 1);
      const double c2 = 1.0 - std::pow(beta2, k + 1);
      params.array() -= lr * (first.array() / c1) / ((second.array() / c2).sqrt() + jitter);
    } else {
      second = rms_decay * second + (1.0 - rms_decay) * grad.cwiseAbs2();
      params.array() -= lr * grad.array() / (second.array().sqrt() + jitter);
    }
    if (!params.allFinite())
      throw FitDivergedError("fit diverged at iteration " + std::to_string(k) +
                                 ": non-finite parameters",
                             result.objective_trace);
    try {
      q = q.with_parameters(params);
    } catch (const std::invalid_argument& e) {
      throw FitDivergedError("fit diverged at iteration " + std::to_string(k) + ": " + e.what(),
                             result.objective_trace);
    }
    result.iterations = k + 1;
  }
  result.q = initial.with_parameters(best_params);
  return result;
}

FitResult fit(const TargetModel& target, const FamilySpec& family, Objective objective,
              const OptimizerConfig& config) {
  return fit(target, VariationalDistribution::standard(family.kind, target.dim, family.df),
             objective, config);
}

}  // namespace vibound
