#ifndef VIBOUND_SERIALIZATION_HPP
#define VIBOUND_SERIALIZATION_HPP

#include <vibound/case_study.hpp>
#include <vibound/inference.hpp>
#include <vibound/models.hpp>
#include <vibound/oracles.hpp>
#include <vibound/workflow.hpp>

#include <json.hpp>

#include <ostream>
#include <string>

namespace vibound {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1.0";

/// Non-finite numbers are written as the strings "inf", "-inf" and "nan".
Json number_to_json(double v);
double number_from_json(const Json& j);

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);
Eigen::VectorXd vector_from_json(const Json& j);
Eigen::MatrixXd matrix_from_json(const Json& j);

Json to_json(const OptimizerConfig& config);
OptimizerConfig optimizer_config_from_json(const Json& j, OptimizerConfig defaults = {});

Json to_json(const VariationalDistribution& q);
VariationalDistribution variational_from_json(const Json& j);

Json to_json(const FitResult& result);
FitResult fit_result_from_json(const Json& j);

Json to_json(const ObjectiveEstimate& estimate);
Json to_json(const DivergenceBound& bound);
Json to_json(const WassersteinBound& bound);
Json to_json(const SummaryErrorBounds& bounds);
Json to_json(const Moments& m);
Json to_json(const WeightedMoments& m);

Json to_json(const WorkflowConfig& config);
/// Missing keys keep their defaults; unknown keys throw std::invalid_argument.
WorkflowConfig workflow_config_from_json(const Json& j);

Json to_json(const WorkflowReport& report);
Json to_json(const GroundTruth& truth);
Json to_json(const RobustRegressionData& data);
Json to_json(const ErrorMetrics& metrics);
Json to_json(const CaseStudyConfig& config);
Json to_json(const CaseStudyReport& report);

/// Wraps a body with kind, schema version and, optionally, a UTC timestamp.
Json make_document(const std::string& kind, Json body, bool timestamp);

/// Writes "iteration,objective" rows with a header line.
void write_trace_csv(const FitResult& result, std::ostream& out);

}  // namespace vibound

#endif
