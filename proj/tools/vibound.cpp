// Command-line front end: fits, workflows, case studies and oracle values.

#include <vibound/case_study.hpp>
#include <vibound/divergences.hpp>
#include <vibound/numerics.hpp>
#include <vibound/oracles.hpp>
#include <vibound/parallel.hpp>
#include <vibound/serialization.hpp>
#include <vibound/workflow.hpp>

#include <CLI11.hpp>

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace vibound;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitFailure = 1;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

fs::path with_suffix(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out.replace_extension();
  out += suffix;
  return out;
}

TargetModel target_by_name(const std::string& name) {
  try {
    return model_by_name(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

VariationalKind family_by_name(const std::string& name) {
  try {
    return variational_kind_from_string(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

double parse_number(const std::string& token) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    throw UsageError("expected a number, got '" + token + "'");
  }
  if (used != token.size()) throw UsageError("expected a number, got '" + token + "'");
  return v;
}

bool is_number(const std::string& token) {
  try {
    parse_number(token);
    return true;
  } catch (const UsageError&) {
    return false;
  }
}

// Parses "<family> <numbers...>" starting at tokens[pos] and advances pos.
Scalar1D parse_scalar(const std::vector<std::string>& tokens, std::size_t& pos) {
  if (pos >= tokens.size()) throw UsageError("missing distribution");
  const std::string family = tokens[pos++];
  std::vector<double> args;
  while (pos < tokens.size() && is_number(tokens[pos])) args.push_back(parse_number(tokens[pos++]));
  auto need = [&](std::size_t lo, std::size_t hi, const char* usage) {
    if (args.size() < lo || args.size() > hi)
      throw UsageError(family + " expects " + usage);
  };
  try {
    if (family == "normal") {
      need(2, 2, "loc scale");
      return Scalar1D::normal(args[0], args[1]);
    }
    if (family == "t" || family == "student-t") {
      need(3, 3, "loc scale df");
      return Scalar1D::student_t(args[0], args[1], args[2]);
    }
    if (family == "weibull") {
      need(1, 2, "shape [scale]");
      return Scalar1D::weibull(args[0], args.size() > 1 ? args[1] : 1.0);
    }
    if (family == "half-cauchy") {
      need(2, 2, "loc scale");
      return Scalar1D::half_cauchy(args[0], args[1]);
    }
    if (family == "gpd") {
      need(3, 3, "loc scale shape");
      return Scalar1D::generalized_pareto(args[0], args[1], args[2]);
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  throw UsageError("unknown distribution family: " + family);
}

std::pair<Scalar1D, Scalar1D> parse_pair(const std::vector<std::string>& tokens) {
  std::size_t pos = 0;
  Scalar1D a = parse_scalar(tokens, pos);
  Scalar1D b = parse_scalar(tokens, pos);
  if (pos != tokens.size()) throw UsageError("unexpected argument: " + tokens[pos]);
  return {a, b};
}

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) values.push_back(parse_number(item));
  if (values.empty()) throw UsageError("empty vector");
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// Rows separated by ';', entries by ','.
Eigen::MatrixXd parse_matrix(const std::string& text) {
  std::vector<Eigen::VectorXd> rows;
  std::stringstream in(text);
  std::string row;
  while (std::getline(in, row, ';')) rows.push_back(parse_vector(row));
  if (rows.empty()) throw UsageError("empty matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw UsageError("ragged matrix");
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

void print_value(double v) {
  if (std::isinf(v))
    std::printf("%s\n", v > 0 ? "inf" : "-inf");
  else
    std::printf("%.10f\n", v);
}

// Marginal of q over the coordinates in idx; exact for every family.
VariationalDistribution marginal(const VariationalDistribution& q, const std::vector<int>& idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd loc(k);
  for (Eigen::Index i = 0; i < k; ++i) loc(i) = q.loc()(idx[i]);
  if (!q.is_full_rank()) {
    Eigen::VectorXd scale(k);
    for (Eigen::Index i = 0; i < k; ++i) scale(i) = q.scale()(idx[i]);
    return q.is_t() ? VariationalDistribution::mean_field_t(loc, scale, q.df())
                    : VariationalDistribution::mean_field_gaussian(loc, scale);
  }
  const Eigen::MatrixXd L = q.factor();
  const Eigen::MatrixXd shape = L * L.transpose();
  Eigen::MatrixXd sub(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = shape(idx[i], idx[j]);
  const Eigen::MatrixXd factor = Eigen::LLT<Eigen::MatrixXd>(sub).matrixL();
  return q.is_t() ? VariationalDistribution::full_rank_t(loc, factor, q.df())
                  : VariationalDistribution::full_rank_gaussian(loc, factor);
}

std::string slug(const std::string& label) {
  std::string out;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else if (!out.empty() && out.back() != '-')
      out += '-';
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

std::string csv_number(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.10g", v);
  return buffer;
}

// 1-D marginal log densities of q on a grid of +-4 scales per coordinate.
std::string marginal_grid_csv(const VariationalDistribution& q,
                              const std::vector<std::string>& names, int points = 201) {
  std::string out = "coordinate,x,log_density\n";
  for (int i = 0; i < q.dim(); ++i) {
    const VariationalDistribution m = marginal(q, {i});
    const double center = m.loc()(0);
    const double width = 4.0 * m.factor()(0, 0);
    for (int k = 0; k < points; ++k) {
      const double x = center - width + 2.0 * width * k / (points - 1);
      out += names[i] + "," + csv_number(x) + "," +
             csv_number(m.log_density(Eigen::VectorXd::Constant(1, x))) + "\n";
    }
  }
  return out;
}

// 2-D marginal of q over (first, second) and, for 2-D targets, the target's
// log density normalized on the same grid.
std::string joint_grid_csv(const VariationalDistribution& q, const TargetModel& target,
                           int first, int second, int points = 81) {
  const VariationalDistribution m = marginal(q, {first, second});
  const Eigen::MatrixXd L = m.factor();
  const double wx = 4.0 * L.row(0).norm();
  const double wy = 4.0 * L.row(1).norm();
  const bool with_target = target.dim == 2;
  std::vector<std::array<double, 4>> rows;
  for (int a = 0; a < points; ++a)
    for (int b = 0; b < points; ++b) {
      Eigen::Vector2d x(m.loc()(0) - wx + 2.0 * wx * a / (points - 1),
                        m.loc()(1) - wy + 2.0 * wy * b / (points - 1));
      const double lq = m.log_density(x);
      const double lp = with_target ? target.log_density(x) : 0.0;
      rows.push_back({x(0), x(1), lq, lp});
    }
  if (with_target) {
    std::vector<double> lp(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) lp[i] = rows[i][3];
    const double cell = (2.0 * wx / (points - 1)) * (2.0 * wy / (points - 1));
    const double norm = log_sum_exp(lp) + std::log(cell);
    for (auto& r : rows) r[3] -= norm;
  }
  std::string out = with_target ? "x,y,log_density_q,log_density_target\n"
                                : "x,y,log_density_q\n";
  for (const auto& r : rows) {
    out += csv_number(r[0]) + "," + csv_number(r[1]) + "," + csv_number(r[2]);
    if (with_target) out += "," + csv_number(r[3]);
    out += "\n";
  }
  return out;
}

struct GlobalOptions {
  bool no_timestamp = false;
  int threads = 0;
};

struct FitOptions {
  std::string model;
  std::string objective = "klvi";
  std::string family = "mf-t";
  double df = 40.0;
  std::uint64_t seed = 1;
  int iterations = 10000;
  double step_size = 0.01;
  int samples = 30;
  std::string out;
  std::string trace;
};

int run_fit(const FitOptions& o, const GlobalOptions& g) {
  const TargetModel target = target_by_name(o.model);
  const FamilySpec family{family_by_name(o.family), o.df};
  if (o.objective != "klvi" && o.objective != "chivi")
    throw UsageError("objective must be klvi or chivi");
  OptimizerConfig config;
  config.seed = o.seed;
  config.iterations = o.iterations;
  config.step_size = o.step_size;
  config.mc_samples_per_step = o.samples;
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Objective objective = o.objective == "klvi" ? Objective::ELBO : Objective::CUBO;
  FitResult result = fit(target, family, objective, config);

  Json body{{"model", target.name}, {"coordinates", target.coordinate_names}};
  body["fit"] = to_json(result);
  write_json(o.out, make_document("fit_result", body, !g.no_timestamp));
  std::ostringstream csv;
  write_trace_csv(result, csv);
  write_text(o.trace.empty() ? with_suffix(o.out, ".trace.csv") : fs::path(o.trace), csv.str());
  std::printf("%s %s: best smoothed objective %.6f at iteration %d\n", target.name.c_str(),
              o.objective.c_str(), result.best_objective(), result.best_iteration);
  return kExitOk;
}

struct WorkflowOptions {
  std::string model;
  std::string config;
  std::string out;
  std::string table;
};

int run_workflow_command(const WorkflowOptions& o, const GlobalOptions& g) {
  const TargetModel target = target_by_name(o.model);
  WorkflowConfig config;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw UsageError("cannot read config " + o.config);
    try {
      config = workflow_config_from_json(Json::parse(in));
    } catch (const std::exception& e) {
      throw UsageError(std::string("invalid workflow config: ") + e.what());
    }
  }
  const WorkflowReport report = run_workflow(target, config);
  write_json(o.out, make_document("workflow_report", to_json(report), !g.no_timestamp));
  const std::string table = format_report(report);
  write_text(o.table.empty() ? with_suffix(o.out, ".txt") : fs::path(o.table), table);
  std::fputs(table.c_str(), stdout);
  return exit_code(report.decision);
}

struct CaseStudyOptions {
  std::string study;
  std::string out;
  std::uint64_t seed = 1;
};

int run_case_study_command(const CaseStudyOptions& o, const GlobalOptions& g) {
  CaseStudy study;
  try {
    study = case_study_from_string(o.study);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  CaseStudyConfig config = default_case_study_config(study);
  config.seed = o.seed;
  const CaseStudyReport report = run_case_study(study, config);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_json(dir / "case_study.json",
             make_document("case_study", to_json(report), !g.no_timestamp));
  const std::string table = format_case_study(report);
  write_text(dir / "table.txt", table);
  for (const auto& column : report.columns) {
    if (!column.fit) continue;
    const TargetModel target = model_by_name(column.model);
    const std::string name = slug(column.label);
    write_text(dir / ("marginals_" + name + ".csv"),
               marginal_grid_csv(column.fit->q, target.coordinate_names));
    const int first = study == CaseStudy::EightSchools ? 1 : 0;
    write_text(dir / ("density_" + name + ".csv"),
               joint_grid_csv(column.fit->q, target, first, first + 1));
  }
  std::fputs(table.c_str(), stdout);
  return report.all_ok() ? kExitOk : kExitFailure;
}

struct OracleOptions {
  std::vector<std::string> tokens;
  double p = 1.0;
  std::string divergence = "kl";
  double alpha = 2.0;
  std::string mean1, cov1, mean2, cov2;
};

int run_w1d(const OracleOptions& o) {
  if (!(o.p >= 1.0)) throw UsageError("--p must be at least 1");
  const auto [a, b] = parse_pair(o.tokens);
  print_value(wasserstein_1d(a, b, o.p));
  return kExitOk;
}

int run_wgauss(const OracleOptions& o) {
  const Eigen::VectorXd m1 = parse_vector(o.mean1);
  const Eigen::VectorXd m2 = parse_vector(o.mean2);
  const Eigen::MatrixXd c1 = parse_matrix(o.cov1);
  const Eigen::MatrixXd c2 = parse_matrix(o.cov2);
  if (m1.size() != m2.size() || c1.rows() != m1.size() || c1.cols() != m1.size() ||
      c2.rows() != m1.size() || c2.cols() != m1.size())
    throw UsageError("means and covariances must have matching dimensions");
  try {
    print_value(wasserstein_gaussian(m1, c1, m2, c2));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return kExitOk;
}

int run_divergence(const OracleOptions& o) {
  if (o.tokens.empty()) throw UsageError("missing divergence kind");
  const std::string kind = o.tokens.front();
  const std::vector<std::string> rest(o.tokens.begin() + 1, o.tokens.end());
  const auto [a, b] = parse_pair(rest);
  DivergenceKind div = DivergenceKind::kl();
  if (kind == "renyi") {
    if (!(o.alpha > 1.0)) throw UsageError("--alpha must exceed 1");
    div = DivergenceKind::renyi(o.alpha);
  } else if (kind != "kl") {
    throw UsageError("divergence must be kl or renyi");
  }
  print_value(divergence_1d_quadrature(div, a, b));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Validated variational inference: fits, diagnostics and error bounds"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_flag("--no-timestamp", global.no_timestamp, "Omit timestamps from JSON outputs");
  app.add_option("--threads", global.threads, "Worker thread cap (default: VIBOUND_THREADS)")
      ->check(CLI::PositiveNumber);

  FitOptions fit_options;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a variational approximation");
  fit_cmd->add_option("--model", fit_options.model, "Model name")->required();
  fit_cmd->add_option("--objective", fit_options.objective, "klvi or chivi")->capture_default_str();
  fit_cmd->add_option("--family", fit_options.family, "mf-t, mf-gaussian, fr-gaussian or fr-t")
      ->capture_default_str();
  fit_cmd->add_option("--df", fit_options.df, "Degrees of freedom for t families")
      ->capture_default_str();
  fit_cmd->add_option("--seed", fit_options.seed, "Random seed")->capture_default_str();
  fit_cmd->add_option("--iterations", fit_options.iterations)->capture_default_str();
  fit_cmd->add_option("--step-size", fit_options.step_size)->capture_default_str();
  fit_cmd->add_option("--samples", fit_options.samples, "Monte Carlo draws per step")
      ->capture_default_str();
  fit_cmd->add_option("--out", fit_options.out, "FitResult JSON path")->required();
  fit_cmd->add_option("--trace", fit_options.trace, "Trace CSV path (default: <out>.trace.csv)");

  WorkflowOptions workflow_options;
  auto* workflow_cmd = app.add_subcommand("workflow", "Run the validated workflow");
  workflow_cmd->add_option("--model", workflow_options.model, "Model name")->required();
  workflow_cmd->add_option("--config", workflow_options.config, "Workflow config JSON");
  workflow_cmd->add_option("--out", workflow_options.out, "Report JSON path")->required();
  workflow_cmd->add_option("--table", workflow_options.table, "Text table path (default: <out>.txt)");

  CaseStudyOptions case_options;
  auto* case_cmd = app.add_subcommand("case-study", "Reproduce a case-study table");
  case_cmd->add_option("study", case_options.study, "eight-schools or robust-regression")
      ->required();
  case_cmd->add_option("--out", case_options.out, "Output directory")->required();
  case_cmd->add_option("--seed", case_options.seed, "Random seed")->capture_default_str();

  OracleOptions oracle_options;
  auto* oracle_cmd = app.add_subcommand("oracle", "Evaluate an exact oracle");
  oracle_cmd->require_subcommand(1);
  auto* w1d_cmd = oracle_cmd->add_subcommand("w1d", "W_p between 1-D distributions");
  w1d_cmd->add_option("--p", oracle_options.p, "Order p >= 1")->capture_default_str();
  w1d_cmd->add_option("dists", oracle_options.tokens, "<family> <params> <family> <params>")
      ->required();
  auto* wgauss_cmd = oracle_cmd->add_subcommand("wgauss", "W_2 between Gaussians");
  wgauss_cmd->add_option("--mean1", oracle_options.mean1, "Comma-separated mean")->required();
  wgauss_cmd->add_option("--cov1", oracle_options.cov1, "Rows split by ';'")->required();
  wgauss_cmd->add_option("--mean2", oracle_options.mean2)->required();
  wgauss_cmd->add_option("--cov2", oracle_options.cov2)->required();
  auto* div_cmd = oracle_cmd->add_subcommand("divergence", "KL or Renyi divergence by quadrature");
  div_cmd->add_option("--alpha", oracle_options.alpha, "Renyi order")->capture_default_str();
  div_cmd->add_option("args", oracle_options.tokens, "{kl|renyi} <dist> <dist>")->required();
  for (auto* cmd : {w1d_cmd, div_cmd}) cmd->allow_extras(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (global.threads > 0) set_thread_count(static_cast<std::size_t>(global.threads));

  try {
    if (*fit_cmd) return run_fit(fit_options, global);
    if (*workflow_cmd) return run_workflow_command(workflow_options, global);
    if (*case_cmd) return run_case_study_command(case_options, global);
    if (*w1d_cmd) return run_w1d(oracle_options);
    if (*wgauss_cmd) return run_wgauss(oracle_options);
    if (*div_cmd) return run_divergence(oracle_options);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const FitDivergedError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
