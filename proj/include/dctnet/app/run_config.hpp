#pragma once

#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "dctnet/data/synth.hpp"
#include "dctnet/metrics/metrics.hpp"
#include "dctnet/model/config.hpp"

namespace dctnet::app {

/// How gen-data builds a dataset: either the explicit `specs` list, or
/// `clips` copies of `base` with seeds base.seed, base.seed + 1, ... and
/// backgrounds cycling through `backgrounds` when it is non-empty.
struct GenerateConfig {
    int clips = 5;
    std::string prefix = "clip";
    data::ClipSpec base;
    std::vector<std::string> backgrounds;
    std::vector<data::ClipSpec> specs;
};

/// Everything one run needs. Every field has a default, so `{}` is valid.
struct RunConfig {
    model::ModelConfig model;
    metrics::MetricsConfig metrics;
    GenerateConfig generate;
    std::string data;                    // training / evaluation dataset dir
    std::vector<std::string> eval_data;  // held-out splits for ablate
    std::string out;                     // artifact directory
};

void to_json(nlohmann::json& j, const GenerateConfig& c);
void from_json(const nlohmann::json& j, GenerateConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Parses a JSON document; throws ConfigError on syntax errors, unknown
/// keys, or invalid values.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Writes the resolved config to <dir>/run_config.json.
void echo_run_config(const RunConfig& config, const std::filesystem::path& dir);

/// The clips described by a GenerateConfig, named <prefix>_NN.
data::Dataset generate_dataset(const GenerateConfig& config);

}  // namespace dctnet::app
