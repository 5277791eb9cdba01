#ifndef VIBOUND_INFERENCE_HPP
#define VIBOUND_INFERENCE_HPP

#include <vibound/distributions.hpp>
#include <vibound/models.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vibound {

enum class Objective { ELBO, CUBO };

std::string to_string(Objective objective);

struct ObjectiveEstimate {
  Objective kind = Objective::ELBO;
  /// Order of the upper bound (CUBO only).
  double alpha = 2.0;
  double value = 0.0;
  double mc_std_error = 0.0;
  int T = 0;
  std::uint64_t seed = 0;
};

/// Thrown when the target log density is not finite at a draw.
class NonFiniteDensityError : public std::domain_error {
 public:
  NonFiniteDensityError(const std::string& what, Eigen::VectorXd point)
      : std::domain_error(what), point_(std::move(point)) {}
  const Eigen::VectorXd& point() const { return point_; }

 private:
  Eigen::VectorXd point_;
};

/// Thrown when an optimizer run produces a non-finite objective or iterate.
class FitDivergedError : public std::runtime_error {
 public:
  FitDivergedError(const std::string& what, std::vector<std::pair<int, double>> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<std::pair<int, double>>& trace() const { return trace_; }

 private:
  std::vector<std::pair<int, double>> trace_;
};

/// Draws T points from q and returns them with the log importance weights
/// log pi*(theta_t) - log q(theta_t).
struct WeightedSample {
  SampleBatch batch;
  Eigen::VectorXd log_weights;
};

WeightedSample log_importance_weights(const TargetModel& target,
                                      const VariationalDistribution& q, int T,
                                      std::uint64_t seed);

ObjectiveEstimate elbo_from_log_weights(const Eigen::VectorXd& log_weights,
                                        std::uint64_t seed = 0);
ObjectiveEstimate cubo_from_log_weights(const Eigen::VectorXd& log_weights, double alpha,
                                        std::uint64_t seed = 0);

ObjectiveEstimate estimate_elbo(const TargetModel& target, const VariationalDistribution& q,
                                int T, std::uint64_t seed);
ObjectiveEstimate estimate_cubo(const TargetModel& target, const VariationalDistribution& q,
                                int T, std::uint64_t seed, double alpha = 2.0);

/// Reparameterization gradient of the ELBO or CUBO with respect to
/// q.parameters(). The CUBO gradient is the softmax(alpha * log w)-weighted
/// average of per-draw gradients, so it never leaves log space.
Eigen::VectorXd grad_estimate(const TargetModel& target, const VariationalDistribution& q,
                              int T, std::uint64_t seed, Objective objective,
                              double alpha = 2.0);

enum class Optimizer { Adam, RMSProp };

struct OptimizerConfig {
  Optimizer algorithm = Optimizer::Adam;
  double step_size = 0.01;
  int iterations = 10000;
  int mc_samples_per_step = 30;
  /// Step size multiplier applied at each quarter of the run.
  double step_decay = 0.5;
  int convergence_window = 500;
  double relative_tolerance = 1e-4;
  /// Half-life in steps of the exponential smoothing used to pick the best iterate.
  double smoothing_half_life = 50.0;
  /// CUBO order used when the objective is CUBO.
  double alpha = 2.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct FamilySpec {
  VariationalKind kind = VariationalKind::MeanFieldT;
  double df = 40.0;
};

struct FitResult {
  VariationalDistribution q;
  Objective objective = Objective::ELBO;
  /// (iteration, smoothed objective) for every iteration.
  std::vector<std::pair<int, double>> objective_trace;
  bool converged = false;
  int converged_at = -1;
  int iterations = 0;
  int best_iteration = 0;
  OptimizerConfig config;

  /// Smoothed objective at the returned iterate.
  double best_objective() const {
    return objective_trace.empty() ? 0.0 : objective_trace.at(best_iteration).second;
  }
};

/// Runs stochastic optimization of the objective starting from `initial`.
/// Returns the iterate with the best smoothed objective, ignoring the first
/// four smoothing half-lives while the average warms up.
FitResult fit(const TargetModel& target, const VariationalDistribution& initial,
              Objective objective, const OptimizerConfig& config);

/// Starts from the standard member of the family (zero location, unit scale).
FitResult fit(const TargetModel& target, const FamilySpec& family, Objective objective,
              const OptimizerConfig& config);

}  // namespace vibound

#endif
