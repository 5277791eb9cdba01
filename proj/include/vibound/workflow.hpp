#ifndef VIBOUND_WORKFLOW_HPP
#define VIBOUND_WORKFLOW_HPP

#include <vibound/bounds.hpp>
#include <vibound/inference.hpp>
#include <vibound/models.hpp>
#include <vibound/psis.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vibound {

struct WorkflowThresholds {
  double k_hat_max = 0.7;
  double delta_moderate = 4.6;
  double delta_star = 0.01;
  /// Scale below which w_bar_2 counts as small. When absent the workflow
  /// uses 0.1 * sqrt(||Cov||_2) of the CUBO fit and flags it as heuristic.
  std::optional<double> w_small;

  void validate() const;
};

struct WorkflowConfig {
  FamilySpec family;
  OptimizerConfig chivi;
  OptimizerConfig klvi;
  /// Starts CHIVI at the KLVI optimum instead of the standard member. The
  /// KLVI fit then also serves step 4.
  bool chivi_warm_start = true;
  /// Draws used for k_hat, the objective estimates and PSIS moments.
  int T_diag = 100000;
  WorkflowThresholds thresholds;
  /// Adds the EI, PolyQ, SqrtEI and EI2p bounds to the PI bound.
  bool extended_bounds = false;
  /// Standard errors added to delta_bar_2 for the conservative bound.
  double z_inflation = 3.0;
  /// Position of this run in a user-driven refinement loop.
  int loop_iteration = 0;
  /// Optimizer seeds and diagnostic draws are derived from this seed.
  std::uint64_t seed = 1;

  WorkflowConfig();
  void validate() const;
};

enum class Decision { RefineFamilyOrReparameterize, UseDirect, UsePSIS, StageFailed };

std::string to_string(Decision decision);
Decision decision_from_string(const std::string& name);

/// Exit code of the command-line workflow: 0, 10, 20 or 30.
int exit_code(Decision decision);

struct StageRecord {
  int step = 0;
  std::string name;
  /// "ok", "stop" or "failed".
  std::string status;
  std::string detail;
};

struct WorkflowReport {
  std::string model;
  WorkflowConfig config;
  std::optional<FitResult> chivi_fit;
  std::optional<FitResult> klvi_fit;
  std::optional<double> k_hat;
  int psis_tail_count = 0;
  std::optional<DivergenceBound> delta_bar_2;
  /// delta_bar_2 inflated by z_inflation standard errors.
  std::optional<double> delta_bar_2_conservative;
  std::optional<WassersteinBound> w_bar_2;
  /// Every bound computed for W_2; w_bar_2 is the smallest.
  std::vector<WassersteinBound> w_bar_2_candidates;
  std::optional<WassersteinBound> w_bar_1;
  std::optional<SummaryErrorBounds> summary_bounds;
  double w_small = 0.0;
  bool w_small_heuristic = false;
  std::optional<Moments> approximation_moments;
  std::optional<WeightedMoments> psis_moments;
  Decision decision = Decision::StageFailed;
  std::vector<StageRecord> stage_log;
  std::vector<std::string> hints;
};

/// Pure threshold logic. Non-finite divergence or Wasserstein bounds and
/// k_hat above the threshold give Refine. An absent w_small never allows
/// UseDirect.
Decision classify(double delta_bar_2, double w_bar_2, double k_hat,
                  const WorkflowThresholds& thresholds);

/// Runs the validated workflow. Stage errors end the run with decision
/// StageFailed and a partial report; invalid configs throw
/// std::invalid_argument.
WorkflowReport run_workflow(const TargetModel& target, const WorkflowConfig& config);

/// Fixed-width text rendering of a report.
std::string format_report(const WorkflowReport& report);

}  // namespace vibound

#endif
