#pragma once

// JSON documents exchanged with the command-line tool. Schemas are described
// in docs/formats.md. Parse errors throw ErrorCode::config naming the field.

#include <nlohmann/json.hpp>

#include "factorsde/estimator.hpp"
#include "factorsde/hypothesis_test.hpp"
#include "factorsde/mc_harness.hpp"
#include "factorsde/model.hpp"
#include "factorsde/sde_sim.hpp"

namespace factorsde {

using Json = nlohmann::ordered_json;

Json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const Json& j);

/// {"A": [[...], ...] row-major, "sigma_ff": vech, "sigma_ee": [...]}
Json to_json(const ParamVector& params);
ParamVector params_from_json(const Json& j, Index p, Index k);

/// Model document: ModelSpec fields plus the ParamVector fields.
Json model_to_json(const ModelSpec& spec, const ParamVector& params);

Json to_json(const SimConfig& config);
SimConfig sim_config_from_json(const Json& j);

Json to_json(const RealisedCov& q);
Json to_json(const FitResult& fit);
Json to_json(const TestResult& test);
Json to_json(const SelectionResult& sel);

Json to_json(const FitOptions& options);
FitOptions fit_options_from_json(const Json& j, Index p, Index k);

Json to_json(const Experiment& exp);
Experiment experiment_from_json(const Json& j);

/// Applies "a.b.c=value" to j; value is parsed as JSON when possible,
/// otherwise stored as a string.
void apply_override(Json& j, const std::string& assignment);

}  // namespace factorsde
