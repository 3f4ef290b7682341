#pragma once

#include "degrade/evaluation.hpp"
#include "degrade/simulate.hpp"

#include <json.hpp>

#include <filesystem>

namespace degrade {

using Json = nlohmann::ordered_json;

// Missing keys keep the values already in `base`; unknown keys are rejected.
ModelConfig config_from_json(const Json& j, ModelConfig base = {});
Json config_to_json(const ModelConfig& config);

FitOptions fit_options_from_json(const Json& j, FitOptions base = {});
Json fit_options_to_json(const FitOptions& options);

// Starts from default_spec(seed) and overrides the keys present.
SyntheticSpec spec_from_json(const Json& j);
Json spec_to_json(const SyntheticSpec& spec);

Json fpca_to_json(const FpcaModel& model);
Json fit_report(const FittedModel& model);
Json metrics_to_json(const Metrics& m);
Json truth_to_json(const SyntheticData& data);

Json read_json(const std::filesystem::path& path);
// Two-space indentation and a trailing newline.
void write_json(const Json& j, const std::filesystem::path& path);

}  // namespace degrade
