#include <vibound/numerics.hpp>
#include <vibound/random.hpp>
#include <vibound/workflow.hpp>

#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <stdexcept>

namespace vibound {

namespace {

constexpr int kSqrtEIGridPoints = 25;

std::string fmt(double v, int precision = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*g", precision, v);
  return buffer;
}

void log_stage(WorkflowReport& report, int step, std::string name, std::string status,
               std::string detail = {}) {
  report.stage_log.push_back({step, std::move(name), std::move(status), std::move(detail)});
}

std::vector<WassersteinBound> extended_bounds(const VariationalDistribution& q, double delta,
                                              int T, std::uint64_t seed) {
  std::vector<WassersteinBound> out;
  const double p = 2.0;

  const EICScan eic = eic_scan(q, p, T, derive_seed(seed, 0));
  out.push_back(wasserstein_bound_ei(eic.best_constant(), delta, p));

  PolyMoments poly;
  const auto m4 = norm_moment_analytic(q, 4);
  const auto m8 = norm_moment_analytic(q, 8);
  poly.moment_2p = m4 ? *m4 : norm_moment_monte_carlo(q, 4.0, T, derive_seed(seed, 1)).value;
  poly.moment_2pq = m8 ? *m8 : norm_moment_monte_carlo(q, 8.0, T, derive_seed(seed, 2)).value;
  out.push_back(wasserstein_bound_poly_q(2.0, poly, delta, delta, p));

  const double spread = std::sqrt(std::max(poly.moment_2p, 0.0));
  const double typical = spread > 0.0 && std::isfinite(spread) ? std::sqrt(spread) : 1.0;
  const auto grid = log_grid(1e-3 / typical, 10.0 / typical, kSqrtEIGridPoints);
  out.push_back(wasserstein_bound_sqrt_ei(2.0, log_mgf_scan(q, 1.0, grid, T, derive_seed(seed, 3)),
                                          delta, delta, p));

  const double typical4 = std::isfinite(poly.moment_2p) && poly.moment_2p > 0.0
                              ? poly.moment_2p
                              : 1.0;
  const auto grid4 = log_grid(1e-3 / typical4, 10.0 / typical4, kSqrtEIGridPoints);
  out.push_back(wasserstein_bound_ei2p(log_mgf_scan(q, 4.0, grid4, T, derive_seed(seed, 4)),
                                       delta, p));
  return out;
}

}  // namespace

void WorkflowThresholds::validate() const {
  if (!(k_hat_max > 0.0)) throw std::invalid_argument("k_hat_max must be positive");
  if (!(delta_moderate > 0.0)) throw std::invalid_argument("delta_moderate must be positive");
  if (!(delta_star > 0.0)) throw std::invalid_argument("delta_star must be positive");
  if (!(delta_star < delta_moderate))
    throw std::invalid_argument("delta_star must be below delta_moderate");
  if (w_small && !(*w_small > 0.0)) throw std::invalid_argument("w_small must be positive");
}

WorkflowConfig::WorkflowConfig() {
  chivi.mc_samples_per_step = 1000;
  chivi.step_size = 0.002;
  chivi.iterations = 2000;
}

void WorkflowConfig::validate() const {
  thresholds.validate();
  chivi.validate();
  klvi.validate();
  if (T_diag < 100) throw std::invalid_argument("T_diag must be at least 100");
  if (!(family.df > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  if (!(z_inflation >= 0.0)) throw std::invalid_argument("z_inflation must be non-negative");
  if (loop_iteration < 0) throw std::invalid_argument("loop_iteration must be non-negative");
}

std::string to_string(Decision decision) {
  switch (decision) {
    case Decision::RefineFamilyOrReparameterize: return "RefineFamilyOrReparameterize";
    case Decision::UseDirect: return "UseDirect";
    case Decision::UsePSIS: return "UsePSIS";
    case Decision::StageFailed: return "StageFailed";
  }
  return "StageFailed";
}

Decision decision_from_string(const std::string& name) {
  for (Decision d : {Decision::RefineFamilyOrReparameterize, Decision::UseDirect,
                     Decision::UsePSIS, Decision::StageFailed})
    if (to_string(d) == name) return d;
  throw std::invalid_argument("unknown decision: " + name);
}

int exit_code(Decision decision) {
  switch (decision) {
    case Decision::UseDirect: return 0;
    case Decision::UsePSIS: return 10;
    case Decision::RefineFamilyOrReparameterize: return 20;
    case Decision::StageFailed: return 30;
  }
  return 30;
}

Decision classify(double delta_bar_2, double w_bar_2, double k_hat,
                  const WorkflowThresholds& thresholds) {
  if (!(k_hat <= thresholds.k_hat_max)) return Decision::RefineFamilyOrReparameterize;
  if (!std::isfinite(delta_bar_2) || !std::isfinite(w_bar_2))
    return Decision::RefineFamilyOrReparameterize;
  if (delta_bar_2 >= thresholds.delta_moderate) return Decision::RefineFamilyOrReparameterize;
  if (thresholds.w_small && delta_bar_2 < thresholds.delta_star && w_bar_2 < *thresholds.w_small)
    return Decision::UseDirect;
  return Decision::UsePSIS;
}

WorkflowReport run_workflow(const TargetModel& target, const WorkflowConfig& config) {
  config.validate();
  WorkflowReport report;
  report.model = target.name;
  report.config = config;
  const std::uint64_t seed = config.seed;
  int step = 1;

  try {
    log_stage(report, 1, "family", "ok",
              to_string(config.family.kind) +
                  (VariationalDistribution::standard(config.family.kind, 1, config.family.df).is_t()
                       ? ", df " + fmt(config.family.df)
                       : ""));

    step = 2;
    OptimizerConfig klvi = config.klvi;
    klvi.seed = derive_seed(seed, 4);
    OptimizerConfig chivi = config.chivi;
    chivi.seed = derive_seed(seed, 2);
    if (config.chivi_warm_start) {
      report.klvi_fit = fit(target, config.family, Objective::ELBO, klvi);
      report.chivi_fit = fit(target, report.klvi_fit->q, Objective::CUBO, chivi);
    } else {
      report.chivi_fit = fit(target, config.family, Objective::CUBO, chivi);
    }
    const VariationalDistribution& approx = report.chivi_fit->q;
    log_stage(report, 2, "chivi_fit", "ok",
              "best iteration " + std::to_string(report.chivi_fit->best_iteration) +
                  ", smoothed CUBO " + fmt(report.chivi_fit->best_objective(), 6));

    step = 3;
    const WeightedSample diag =
        log_importance_weights(target, approx, config.T_diag, derive_seed(seed, 3));
    const PSISResult psis = psis_smooth(diag.log_weights);
    report.k_hat = psis.k_hat;
    report.psis_tail_count = psis.tail_count;
    if (!(psis.k_hat <= config.thresholds.k_hat_max)) {
      report.decision = Decision::RefineFamilyOrReparameterize;
      report.hints = {"use a full-rank family",
                      "reparameterize the model, for example non-centered coordinates"};
      log_stage(report, 3, "k_hat", "stop",
                "k_hat " + fmt(psis.k_hat) + " exceeds " + fmt(config.thresholds.k_hat_max));
      return report;
    }
    log_stage(report, 3, "k_hat", "ok",
              "k_hat " + fmt(psis.k_hat) + " (" + to_string(categorize_k_hat(psis.k_hat)) + ")");

    step = 4;
    if (!report.klvi_fit) report.klvi_fit = fit(target, config.family, Objective::ELBO, klvi);
    log_stage(report, 4, "klvi_fit", "ok",
              "best iteration " + std::to_string(report.klvi_fit->best_iteration) +
                  ", smoothed ELBO " + fmt(report.klvi_fit->best_objective(), 6) +
                  (config.chivi_warm_start ? " (computed in step 2)" : ""));

    step = 5;
    const ObjectiveEstimate elbo = estimate_elbo(target, report.klvi_fit->q, config.T_diag,
                                                 derive_seed(seed, 5));
    const ObjectiveEstimate cubo = cubo_from_log_weights(diag.log_weights, 2.0, derive_seed(seed, 3));
    log_stage(report, 5, "objectives", "ok",
              "ELBO " + fmt(elbo.value, 6) + " +- " + fmt(elbo.mc_std_error, 2) + ", CUBO " +
                  fmt(cubo.value, 6) + " +- " + fmt(cubo.mc_std_error, 2));

    step = 6;
    report.delta_bar_2 = divergence_bound(cubo, elbo);
    const double delta = report.delta_bar_2->delta_bar;
    report.delta_bar_2_conservative = report.delta_bar_2->inflated(config.z_inflation);
    log_stage(report, 6, "delta_bar_2", "ok",
              fmt(delta) + " (conservative " + fmt(*report.delta_bar_2_conservative) + ")");

    step = 7;
    const std::uint64_t bound_seed = derive_seed(seed, 7);
    const MomentConstant pic4 = pic_best_available(approx, 4, config.T_diag, bound_seed);
    report.w_bar_2_candidates.push_back(wasserstein_bound_pi(pic4, *report.delta_bar_2, 2.0));
    if (config.extended_bounds)
      for (auto& w : extended_bounds(approx, delta, config.T_diag, derive_seed(bound_seed, 1)))
        report.w_bar_2_candidates.push_back(std::move(w));
    report.w_bar_2 = report.w_bar_2_candidates.front();
    for (const auto& w : report.w_bar_2_candidates)
      if (w.value < report.w_bar_2->value) report.w_bar_2 = w;
    report.w_bar_1 = wasserstein_bound_pi(pic_best_available(approx, 2, config.T_diag, bound_seed),
                                         *report.delta_bar_2, 1.0);

    double spectral_scale = kInf;
    try {
      report.approximation_moments = moments(approx);
      spectral_scale = std::sqrt(symmetric_spectral_norm(report.approximation_moments->cov));
    } catch (const std::domain_error&) {
    }
    report.summary_bounds =
        summary_error_bounds(report.w_bar_1->value, report.w_bar_2->value, spectral_scale);
    log_stage(report, 7, "w_bar_2", "ok",
              fmt(report.w_bar_2->value) + " via " + to_string(report.w_bar_2->method));

    step = 8;
    WorkflowThresholds thresholds = config.thresholds;
    if (!thresholds.w_small) {
      thresholds.w_small = 0.1 * spectral_scale;
      report.w_small_heuristic = true;
    }
    report.w_small = *thresholds.w_small;
    report.decision = classify(delta, report.w_bar_2->value, psis.k_hat, thresholds);
    if (report.decision == Decision::UsePSIS)
      report.psis_moments = psis_expectation(diag.batch.draws, psis);
    if (report.decision == Decision::RefineFamilyOrReparameterize)
      report.hints = {"use a full-rank family",
                      "reparameterize the model, for example non-centered coordinates"};
    log_stage(report, 8, "classify", "ok",
              to_string(report.decision) + (report.w_small_heuristic
                                                ? " (w_small " + fmt(report.w_small) + ", heuristic)"
                                                : " (w_small " + fmt(report.w_small) + ")"));
  } catch (const std::exception& e) {
    report.decision = Decision::StageFailed;
    log_stage(report, step, "error", "failed", e.what());
  }
  return report;
}

std::string format_report(const WorkflowReport& r) {
  std::ostringstream out;
  auto row = [&out](const std::string& label, const std::string& value) {
    char buffer[160];
    std::snprintf(buffer, sizeof buffer, "%-28s %s\n", label.c_str(), value.c_str());
    out << buffer;
  };
  row("model", r.model);
  const bool t_family = r.config.family.kind == VariationalKind::MeanFieldT ||
                        r.config.family.kind == VariationalKind::FullRankT;
  row("family", to_string(r.config.family.kind) +
                    (t_family ? " (df " + fmt(r.config.family.df) + ")" : ""));
  row("loop iteration", std::to_string(r.config.loop_iteration));
  if (r.k_hat) row("k_hat", fmt(*r.k_hat, 3));
  if (r.delta_bar_2) {
    row("D2 bound", fmt(r.delta_bar_2->delta_bar, 4) + " +- " +
                        fmt(r.delta_bar_2->combined_mc_error, 2));
    row("D2 bound (conservative)", fmt(*r.delta_bar_2_conservative, 4));
  }
  for (const auto& w : r.w_bar_2_candidates)
    row("W2 bound [" + to_string(w.method) + "]", fmt(w.value, 4));
  if (r.w_bar_2) row("W2 bound", fmt(r.w_bar_2->value, 4));
  if (r.summary_bounds) {
    row("mean error bound", fmt(r.summary_bounds->mean_bound, 4));
    row("std error bound", fmt(r.summary_bounds->std_bound, 4));
    row("MAD error bound", fmt(r.summary_bounds->mad_bound, 4));
    row("cov error bound", fmt(r.summary_bounds->cov_bound, 4));
  }
  row("decision", to_string(r.decision));
  for (const auto& h : r.hints) row("hint", h);
  out << "\n";
  for (const auto& s : r.stage_log)
    row("step " + std::to_string(s.step) + " " + s.name + " [" + s.status + "]", s.detail);
  return out.str();
}

}  // namespace vibound
