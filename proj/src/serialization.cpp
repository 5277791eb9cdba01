#include <vibound/serialization.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>
#include <set>
#include <stdexcept>

namespace vibound {

namespace {

std::string optimizer_name(Optimizer o) { return o == Optimizer::Adam ? "adam" : "rmsprop"; }

Optimizer optimizer_from_name(const std::string& name) {
  if (name == "adam") return Optimizer::Adam;
  if (name == "rmsprop") return Optimizer::RMSProp;
  throw std::invalid_argument("unknown optimizer: " + name);
}

Objective objective_from_name(const std::string& name) {
  if (name == "elbo") return Objective::ELBO;
  if (name == "cubo") return Objective::CUBO;
  throw std::invalid_argument("unknown objective: " + name);
}

void reject_unknown_keys(const Json& j, const std::set<std::string>& known, const char* where) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + " must be an object");
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      throw std::invalid_argument(std::string("unknown key in ") + where + ": " + item.key());
}

Json to_json_optional(const std::optional<double>& v) {
  return v ? number_to_json(*v) : Json(nullptr);
}

}  // namespace

Json number_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw std::invalid_argument("expected a number");
}

Json to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_to_json(v(i)));
  return out;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Eigen::VectorXd(m.row(i))));
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number_from_json(j[i]);
  return v;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  if (j.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != j[0].size()) throw std::invalid_argument("ragged matrix");
    m.row(static_cast<Eigen::Index>(i)) = vector_from_json(j[i]).transpose();
  }
  return m;
}

Json to_json(const OptimizerConfig& c) {
  return Json{{"algorithm", optimizer_name(c.algorithm)},
              {"step_size", c.step_size},
              {"iterations", c.iterations},
              {"mc_samples_per_step", c.mc_samples_per_step},
              {"step_decay", c.step_decay},
              {"convergence_window", c.convergence_window},
              {"relative_tolerance", c.relative_tolerance},
              {"smoothing_half_life", c.smoothing_half_life},
              {"alpha", c.alpha},
              {"seed", c.seed}};
}

OptimizerConfig optimizer_config_from_json(const Json& j, OptimizerConfig c) {
  reject_unknown_keys(j,
                      {"algorithm", "step_size", "iterations", "mc_samples_per_step", "step_decay",
                       "convergence_window", "relative_tolerance", "smoothing_half_life", "alpha",
                       "seed"},
                      "optimizer config");
  if (j.contains("algorithm")) c.algorithm = optimizer_from_name(j["algorithm"].get<std::string>());
  if (j.contains("step_size")) c.step_size = j["step_size"].get<double>();
  if (j.contains("iterations")) c.iterations = j["iterations"].get<int>();
  if (j.contains("mc_samples_per_step")) c.mc_samples_per_step = j["mc_samples_per_step"].get<int>();
  if (j.contains("step_decay")) c.step_decay = j["step_decay"].get<double>();
  if (j.contains("convergence_window")) c.convergence_window = j["convergence_window"].get<int>();
  if (j.contains("relative_tolerance")) c.relative_tolerance = j["relative_tolerance"].get<double>();
  if (j.contains("smoothing_half_life"))
    c.smoothing_half_life = j["smoothing_half_life"].get<double>();
  if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  c.validate();
  return c;
}

Json to_json(const VariationalDistribution& q) {
  Json out{{"kind", to_string(q.kind())}, {"dim", q.dim()}};
  if (q.is_t()) out["df"] = q.df();
  out["loc"] = to_json(q.loc());
  if (q.is_full_rank())
    out["factor"] = to_json(q.factor());
  else
    out["scale"] = to_json(q.scale());
  out["parameters"] = to_json(q.parameters());
  return out;
}

VariationalDistribution variational_from_json(const Json& j) {
  const VariationalKind kind = variational_kind_from_string(j.at("kind").get<std::string>());
  const Eigen::VectorXd loc = vector_from_json(j.at("loc"));
  const double df = j.contains("df") ? j["df"].get<double>() : 40.0;
  switch (kind) {
    case VariationalKind::MeanFieldGaussian:
      return VariationalDistribution::mean_field_gaussian(loc, vector_from_json(j.at("scale")));
    case VariationalKind::MeanFieldT:
      return VariationalDistribution::mean_field_t(loc, vector_from_json(j.at("scale")), df);
    case VariationalKind::FullRankGaussian:
      return VariationalDistribution::full_rank_gaussian(loc, matrix_from_json(j.at("factor")));
    case VariationalKind::FullRankT:
      return VariationalDistribution::full_rank_t(loc, matrix_from_json(j.at("factor")), df);
  }
  throw std::invalid_argument("unknown variational kind");
}

Json to_json(const FitResult& r) {
  Json trace = Json::array();
  for (const auto& [k, v] : r.objective_trace) trace.push_back(Json::array({k, number_to_json(v)}));
  return Json{{"objective", to_string(r.objective)},
              {"q", to_json(r.q)},
              {"best_objective", number_to_json(r.best_objective())},
              {"converged", r.converged},
              {"converged_at", r.converged_at},
              {"iterations", r.iterations},
              {"best_iteration", r.best_iteration},
              {"config", to_json(r.config)},
              {"objective_trace", trace}};
}

FitResult fit_result_from_json(const Json& j) {
  FitResult r{variational_from_json(j.at("q")),
              objective_from_name(j.at("objective").get<std::string>()),
              {},
              j.at("converged").get<bool>(),
              j.at("converged_at").get<int>(),
              j.at("iterations").get<int>(),
              j.at("best_iteration").get<int>(),
              optimizer_config_from_json(j.at("config"))};
  for (const auto& entry : j.at("objective_trace"))
    r.objective_trace.emplace_back(entry[0].get<int>(), number_from_json(entry[1]));
  return r;
}

Json to_json(const ObjectiveEstimate& e) {
  return Json{{"kind", to_string(e.kind)},
              {"alpha", e.alpha},
              {"value", number_to_json(e.value)},
              {"mc_std_error", number_to_json(e.mc_std_error)},
              {"T", e.T},
              {"seed", e.seed}};
}

Json to_json(const DivergenceBound& b) {
  return Json{{"alpha", b.alpha},
              {"delta_bar", number_to_json(b.delta_bar)},
              {"combined_mc_error", number_to_json(b.combined_mc_error)},
              {"cubo", to_json(b.cubo)},
              {"elbo", to_json(b.elbo)}};
}

Json to_json(const WassersteinBound& b) {
  Json inputs = Json::object();
  for (const auto& [k, v] : b.inputs) inputs[k] = number_to_json(v);
  Json out{{"method", to_string(b.method)},
           {"p", b.p},
           {"value", number_to_json(b.value)},
           {"alpha", b.alpha},
           {"inputs", inputs}};
  if (!b.note.empty()) out["note"] = b.note;
  return out;
}

Json to_json(const SummaryErrorBounds& b) {
  return Json{{"mean_bound", number_to_json(b.mean_bound)},
              {"mad_bound", number_to_json(b.mad_bound)},
              {"std_bound", number_to_json(b.std_bound)},
              {"cov_bound", number_to_json(b.cov_bound)},
              {"S", number_to_json(b.S)}};
}

Json to_json(const Moments& m) {
  return Json{{"mean", to_json(m.mean)}, {"cov", to_json(m.cov)}};
}

Json to_json(const WeightedMoments& m) {
  return Json{{"mean", to_json(m.mean)},
              {"std", to_json(m.std)},
              {"mad", to_json(m.mad)},
              {"cov", to_json(m.cov)}};
}

Json to_json(const WorkflowConfig& c) {
  return Json{{"family", {{"kind", to_string(c.family.kind)}, {"df", c.family.df}}},
              {"chivi", to_json(c.chivi)},
              {"klvi", to_json(c.klvi)},
              {"chivi_warm_start", c.chivi_warm_start},
              {"T_diag", c.T_diag},
              {"thresholds",
               {{"k_hat_max", c.thresholds.k_hat_max},
                {"delta_moderate", c.thresholds.delta_moderate},
                {"delta_star", c.thresholds.delta_star},
                {"w_small", to_json_optional(c.thresholds.w_small)}}},
              {"extended_bounds", c.extended_bounds},
              {"z_inflation", c.z_inflation},
              {"loop_iteration", c.loop_iteration},
              {"seed", c.seed}};
}

WorkflowConfig workflow_config_from_json(const Json& j) {
  reject_unknown_keys(j,
                      {"family", "chivi", "klvi", "chivi_warm_start", "T_diag", "thresholds", "extended_bounds",
                       "z_inflation", "loop_iteration", "seed"},
                      "workflow config");
  WorkflowConfig c;
  if (j.contains("family")) {
    const Json& f = j["family"];
    reject_unknown_keys(f, {"kind", "df"}, "family");
    if (f.contains("kind")) c.family.kind = variational_kind_from_string(f["kind"].get<std::string>());
    if (f.contains("df")) c.family.df = f["df"].get<double>();
  }
  if (j.contains("chivi")) c.chivi = optimizer_config_from_json(j["chivi"], c.chivi);
  if (j.contains("klvi")) c.klvi = optimizer_config_from_json(j["klvi"], c.klvi);
  if (j.contains("chivi_warm_start")) c.chivi_warm_start = j["chivi_warm_start"].get<bool>();
  if (j.contains("T_diag")) c.T_diag = j["T_diag"].get<int>();
  if (j.contains("thresholds")) {
    const Json& t = j["thresholds"];
    reject_unknown_keys(t, {"k_hat_max", "delta_moderate", "delta_star", "w_small"}, "thresholds");
    if (t.contains("k_hat_max")) c.thresholds.k_hat_max = t["k_hat_max"].get<double>();
    if (t.contains("delta_moderate")) c.thresholds.delta_moderate = t["delta_moderate"].get<double>();
    if (t.contains("delta_star")) c.thresholds.delta_star = t["delta_star"].get<double>();
    if (t.contains("w_small") && !t["w_small"].is_null())
      c.thresholds.w_small = t["w_small"].get<double>();
  }
  if (j.contains("extended_bounds")) c.extended_bounds = j["extended_bounds"].get<bool>();
  if (j.contains("z_inflation")) c.z_inflation = j["z_inflation"].get<double>();
  if (j.contains("loop_iteration")) c.loop_iteration = j["loop_iteration"].get<int>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  c.validate();
  return c;
}

Json to_json(const WorkflowReport& r) {
  Json out{{"model", r.model}, {"config", to_json(r.config)}, {"decision", to_string(r.decision)}};
  out["chivi_fit"] = r.chivi_fit ? to_json(*r.chivi_fit) : Json(nullptr);
  out["klvi_fit"] = r.klvi_fit ? to_json(*r.klvi_fit) : Json(nullptr);
  out["k_hat"] = to_json_optional(r.k_hat);
  out["k_hat_category"] = r.k_hat ? Json(to_string(categorize_k_hat(*r.k_hat))) : Json(nullptr);
  out["psis_tail_count"] = r.psis_tail_count;
  out["delta_bar_2"] = r.delta_bar_2 ? to_json(*r.delta_bar_2) : Json(nullptr);
  out["delta_bar_2_conservative"] = to_json_optional(r.delta_bar_2_conservative);
  out["w_bar_2"] = r.w_bar_2 ? to_json(*r.w_bar_2) : Json(nullptr);
  Json candidates = Json::array();
  for (const auto& w : r.w_bar_2_candidates) candidates.push_back(to_json(w));
  out["w_bar_2_candidates"] = candidates;
  out["w_bar_1"] = r.w_bar_1 ? to_json(*r.w_bar_1) : Json(nullptr);
  out["summary_bounds"] = r.summary_bounds ? to_json(*r.summary_bounds) : Json(nullptr);
  out["w_small"] = number_to_json(r.w_small);
  out["w_small_heuristic"] = r.w_small_heuristic;
  out["approximation_moments"] =
      r.approximation_moments ? to_json(*r.approximation_moments) : Json(nullptr);
  out["psis_moments"] = r.psis_moments ? to_json(*r.psis_moments) : Json(nullptr);
  Json log = Json::array();
  for (const auto& s : r.stage_log)
    log.push_back({{"step", s.step}, {"name", s.name}, {"status", s.status}, {"detail", s.detail}});
  out["stage_log"] = log;
  out["hints"] = r.hints;
  return out;
}

Json to_json(const GroundTruth& t) {
  Json out{{"method", to_string(t.method)},
           {"mean", to_json(t.mean)},
           {"std", to_json(t.std)},
           {"mad", to_json(t.mad)},
           {"cov", to_json(t.cov)},
           {"spectral_scale", number_to_json(t.spectral_scale)}};
  if (t.method == GroundTruthMethod::Quadrature) out["log_normalizer"] = t.log_normalizer;
  if (t.method == GroundTruthMethod::ReferenceMCMC) {
    out["mc_error"] = to_json(t.mc_error);
    out["acceptance_rate"] = t.acceptance_rate;
    out["acceptance_warning"] = t.acceptance_warning;
  }
  return out;
}

Json to_json(const RobustRegressionData& d) {
  return Json{{"X", to_json(d.X)},
              {"y", to_json(d.y)},
              {"true_beta", to_json(d.true_beta)},
              {"corr", d.corr},
              {"seed", d.seed}};
}

Json to_json(const ErrorMetrics& m) {
  return Json{{"mean_error", number_to_json(m.mean_error)},
              {"psis_mean_error", to_json_optional(m.psis_mean_error)},
              {"std_error", number_to_json(m.std_error)},
              {"psis_std_error", to_json_optional(m.psis_std_error)},
              {"cov_error", number_to_json(m.cov_error)},
              {"psis_cov_error", to_json_optional(m.psis_cov_error)}};
}

Json to_json(const CaseStudyConfig& c) {
  Json sampler{{"steps", c.sampler.steps},
               {"burn_in", c.sampler.burn_in},
               {"chains", c.sampler.chains},
               {"thin", c.sampler.thin}};
  Json quadrature{{"half_width", c.quadrature.half_width},
                  {"step", c.quadrature.step},
                  {"tolerance", c.quadrature.tolerance},
                  {"boundary_mass", c.quadrature.boundary_mass},
                  {"max_refinements", c.quadrature.max_refinements}};
  return Json{{"klvi", to_json(c.klvi)},
              {"chivi", to_json(c.chivi)},
              {"T_diag", c.T_diag},
              {"sampler", sampler},
              {"quadrature", quadrature},
              {"seed", c.seed}};
}

Json to_json(const CaseStudyReport& r) {
  Json truths = Json::object();
  for (const auto& [model, truth] : r.truths) truths[model] = to_json(truth);
  Json columns = Json::array();
  for (const auto& c : r.columns) {
    Json column{{"label", c.label},
                {"model", c.model},
                {"family", {{"kind", to_string(c.family.kind)}, {"df", c.family.df}}},
                {"objective", to_string(c.objective)},
                {"status", c.failure.empty() ? "ok" : "failed"}};
    if (!c.failure.empty()) column["failure"] = c.failure;
    column["d2_bound"] = to_json_optional(c.d2_bound);
    column["d2_bound_error"] = to_json_optional(c.d2_bound_error);
    column["k_hat"] = to_json_optional(c.k_hat);
    column["w2_bound"] = to_json_optional(c.w2_bound);
    column["errors"] = c.errors ? to_json(*c.errors) : Json(nullptr);
    column["fit"] = c.fit ? to_json(*c.fit) : Json(nullptr);
    columns.push_back(std::move(column));
  }
  return Json{{"study", to_string(r.study)},
              {"config", to_json(r.config)},
              {"truths", truths},
              {"columns", columns}};
}

Json make_document(const std::string& kind, Json body, bool timestamp) {
  Json out{{"schema_version", kSchemaVersion}, {"kind", kind}};
  if (timestamp) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
    out["timestamp"] = buffer;
  }
  out["body"] = std::move(body);
  return out;
}

void write_trace_csv(const FitResult& result, std::ostream& out) {
  out << "iteration,objective\n";
  char buffer[64];
  for (const auto& [k, v] : result.objective_trace) {
    std::snprintf(buffer, sizeof buffer, "%d,%.17g\n", k, v);
    out << buffer;
  }
}

}  // namespace vibound
