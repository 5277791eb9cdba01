#include <vibound/bounds.hpp>
#include <vibound/case_study.hpp>
#include <vibound/psis.hpp>
#include <vibound/random.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace vibound {

namespace {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string cell(const std::optional<double>& v, int precision = 3) {
  if (!v) return "-";
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.*g", precision, *v);
  return buffer;
}

}  // namespace

std::string to_string(CaseStudy study) {
  return study == CaseStudy::EightSchools ? "eight-schools" : "robust-regression";
}

CaseStudy case_study_from_string(const std::string& name) {
  if (name == "eight-schools") return CaseStudy::EightSchools;
  if (name == "robust-regression") return CaseStudy::RobustRegression;
  throw std::invalid_argument("unknown case study: " + name);
}

CaseStudyConfig default_case_study_config(CaseStudy study) {
  CaseStudyConfig config;
  config.chivi.mc_samples_per_step = 1000;
  config.chivi.iterations = 2000;
  config.chivi.step_size = study == CaseStudy::EightSchools ? 0.002 : 0.01;
  return config;
}

bool CaseStudyReport::all_ok() const {
  for (const auto& c : columns)
    if (!c.failure.empty()) return false;
  return true;
}

std::vector<CaseStudyColumn> case_study_columns(CaseStudy study) {
  std::vector<CaseStudyColumn> columns;
  auto add = [&columns](std::string label, std::string model, VariationalKind kind, double df,
                        Objective objective) {
    CaseStudyColumn c;
    c.label = std::move(label);
    c.model = std::move(model);
    c.family = {kind, df};
    c.objective = objective;
    columns.push_back(std::move(c));
  };
  if (study == CaseStudy::EightSchools) {
    add("centered df=40", "eight-schools-centered", VariationalKind::MeanFieldT, 40.0,
        Objective::CUBO);
    add("non-centered df=40", "eight-schools-noncentered", VariationalKind::MeanFieldT, 40.0,
        Objective::CUBO);
    add("non-centered df=8", "eight-schools-noncentered", VariationalKind::MeanFieldT, 8.0,
        Objective::CUBO);
  } else {
    add("mean-field KLVI", "robust-regression", VariationalKind::MeanFieldT, 40.0,
        Objective::ELBO);
    add("mean-field CHIVI", "robust-regression", VariationalKind::MeanFieldT, 40.0,
        Objective::CUBO);
    add("full-rank KLVI", "robust-regression", VariationalKind::FullRankT, 40.0, Objective::ELBO);
  }
  return columns;
}

void evaluate_column(CaseStudyColumn& column, const GroundTruth& truth,
                     const CaseStudyConfig& config) {
  const TargetModel target = model_by_name(column.model);
  const std::uint64_t family_seed = derive_seed(
      config.seed, fnv1a(column.model + "/" + to_string(column.family.kind) + "/" +
                         std::to_string(column.family.df)));

  OptimizerConfig klvi_config = config.klvi;
  klvi_config.seed = derive_seed(family_seed, 1);
  const FitResult klvi = fit(target, column.family, Objective::ELBO, klvi_config);
  if (column.objective == Objective::ELBO) {
    column.fit = klvi;
  } else {
    OptimizerConfig chivi_config = config.chivi;
    chivi_config.seed = derive_seed(family_seed, 2);
    column.fit = fit(target, klvi.q, Objective::CUBO, chivi_config);
  }
  const VariationalDistribution& q = column.fit->q;

  const std::uint64_t diag_seed =
      derive_seed(family_seed, column.objective == Objective::ELBO ? 3 : 4);
  const WeightedSample ws = log_importance_weights(target, q, config.T_diag, diag_seed);
  const PSISResult psis = psis_smooth(ws.log_weights);
  column.k_hat = psis.k_hat;

  const ObjectiveEstimate cubo = cubo_from_log_weights(ws.log_weights, 2.0, diag_seed);
  const ObjectiveEstimate elbo =
      column.objective == Objective::ELBO
          ? elbo_from_log_weights(ws.log_weights, diag_seed)
          : estimate_elbo(target, klvi.q, config.T_diag, derive_seed(family_seed, 3));
  const DivergenceBound delta = divergence_bound(cubo, elbo);
  column.d2_bound = delta.delta_bar;
  column.d2_bound_error = delta.combined_mc_error;
  column.w2_bound =
      wasserstein_bound_pi(pic_best_available(q, 4, config.T_diag, derive_seed(diag_seed, 1)),
                           delta, 2.0)
          .value;

  column.errors = error_metrics(truth, moments(q), psis_expectation(ws.batch.draws, psis));
}

CaseStudyReport run_case_study(CaseStudy study, const CaseStudyConfig& config) {
  CaseStudyReport report;
  report.study = study;
  report.config = config;
  if (study == CaseStudy::EightSchools) {
    ReferenceSamplerConfig sampler = config.sampler;
    sampler.seed = derive_seed(config.seed, 100);
    const TargetModel model = eight_schools_noncentered(eight_schools_data());
    report.truths["eight-schools-centered"] =
        reference_sampler(model, sampler, noncentered_to_centered);
    report.truths["eight-schools-noncentered"] = reference_sampler(model, sampler);
  } else {
    report.truths["robust-regression"] =
        quadrature_posterior_moments(model_by_name("robust-regression"), config.quadrature);
  }
  report.columns = case_study_columns(study);
  for (auto& column : report.columns) {
    try {
      evaluate_column(column, report.truths.at(column.model), config);
    } catch (const std::exception& e) {
      column.failure = e.what();
    }
  }
  return report;
}

CaseStudyReport run_case_study(CaseStudy study) {
  return run_case_study(study, default_case_study_config(study));
}

std::string format_case_study(const CaseStudyReport& report) {
  std::ostringstream out;
  char buffer[256];
  auto line = [&](const std::string& label, auto value_of) {
    std::snprintf(buffer, sizeof buffer, "%-22s", label.c_str());
    out << buffer;
    for (const auto& c : report.columns) {
      const std::string v = c.failure.empty() ? value_of(c) : std::string("failed");
      std::snprintf(buffer, sizeof buffer, " %20s", v.c_str());
      out << buffer;
    }
    out << "\n";
  };
  line("", [](const CaseStudyColumn& c) { return c.label; });
  line("D2 bound", [](const CaseStudyColumn& c) { return cell(c.d2_bound, 2); });
  line("k_hat", [](const CaseStudyColumn& c) { return cell(c.k_hat, 2); });
  line("W2 bound", [](const CaseStudyColumn& c) { return cell(c.w2_bound, 3); });
  auto metric = [](std::optional<double> ErrorMetrics::*field) {
    return [field](const CaseStudyColumn& c) {
      return c.errors ? cell((*c.errors).*field, 2) : std::string("-");
    };
  };
  auto plain = [](double ErrorMetrics::*field) {
    return [field](const CaseStudyColumn& c) {
      return c.errors ? cell((*c.errors).*field, 2) : std::string("-");
    };
  };
  line("mean error", plain(&ErrorMetrics::mean_error));
  line("  with PSIS", metric(&ErrorMetrics::psis_mean_error));
  line("std. dev. error", plain(&ErrorMetrics::std_error));
  line("  with PSIS", metric(&ErrorMetrics::psis_std_error));
  line("covariance error", plain(&ErrorMetrics::cov_error));
  line("  with PSIS", metric(&ErrorMetrics::psis_cov_error));
  out << "\n";
  for (const auto& [model, truth] : report.truths) {
    std::snprintf(buffer, sizeof buffer, "ground truth for %s: %s, ||Cov||^(1/2) = %.3g\n",
                  model.c_str(), to_string(truth.method).c_str(), truth.spectral_scale);
    out << buffer;
  }
  for (const auto& c : report.columns)
    if (!c.failure.empty()) out << c.label << ": " << c.failure << "\n";
  return out.str();
}

}  // namespace vibound
