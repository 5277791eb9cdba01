#ifndef VIBOUND_CASE_STUDY_HPP
#define VIBOUND_CASE_STUDY_HPP

#include <vibound/inference.hpp>
#include <vibound/models.hpp>
#include <vibound/oracles.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vibound {

enum class CaseStudy { EightSchools, RobustRegression };

std::string to_string(CaseStudy study);
CaseStudy case_study_from_string(const std::string& name);

struct CaseStudyConfig {
  OptimizerConfig klvi;
  OptimizerConfig chivi;
  int T_diag = 100000;
  ReferenceSamplerConfig sampler;
  QuadratureConfig quadrature;
  std::uint64_t seed = 1;
};

/// CHIVI runs 2000 steps of 1000 draws from the KLVI optimum, with step size
/// 0.002 for eight schools and 0.01 for robust regression.
CaseStudyConfig default_case_study_config(CaseStudy study);

/// One column of a results table: a model, a family and an objective.
struct CaseStudyColumn {
  std::string label;
  std::string model;
  FamilySpec family;
  Objective objective = Objective::CUBO;

  std::optional<FitResult> fit;
  std::optional<double> d2_bound;
  std::optional<double> d2_bound_error;
  std::optional<double> k_hat;
  std::optional<double> w2_bound;
  std::optional<ErrorMetrics> errors;
  /// Empty on success, otherwise the failure message.
  std::string failure;
};

struct CaseStudyReport {
  CaseStudy study = CaseStudy::EightSchools;
  CaseStudyConfig config;
  /// Ground truth in each model's own coordinates, keyed by model name.
  std::map<std::string, GroundTruth> truths;
  std::vector<CaseStudyColumn> columns;

  bool all_ok() const;
};

/// Column layouts: three mean-field CHIVI columns (centered df 40,
/// non-centered df 40 and df 8) for eight schools; mean-field KLVI,
/// mean-field CHIVI and full-rank KLVI (df 40) for robust regression.
std::vector<CaseStudyColumn> case_study_columns(CaseStudy study);

/**
 * Fits every column, scores it against ground truth and fills the table
 * rows. Each column is scored in the coordinates of the model it was fitted
 * to. Eight schools truth comes from a reference sampler run on the
 * non-centered model, reported in both coordinate systems; robust
 * regression truth comes from grid quadrature. A failing column records its
 * message and the remaining columns still run.
 */
CaseStudyReport run_case_study(CaseStudy study, const CaseStudyConfig& config);
CaseStudyReport run_case_study(CaseStudy study);

/// Evaluates one column against a given ground truth.
void evaluate_column(CaseStudyColumn& column, const GroundTruth& truth,
                     const CaseStudyConfig& config);

std::string format_case_study(const CaseStudyReport& report);

}  // namespace vibound

#endif
