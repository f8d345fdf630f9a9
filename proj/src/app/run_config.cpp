#include "dctnet/app/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dctnet/error.hpp"
#include "dctnet/json_util.hpp"

namespace dctnet::app {

void to_json(nlohmann::json& j, const GenerateConfig& c) {
    j = nlohmann::json{{"clips", c.clips},
                       {"prefix", c.prefix},
                       {"base", c.base},
                       {"backgrounds", c.backgrounds},
                       {"specs", c.specs}};
}

void from_json(const nlohmann::json& j, GenerateConfig& c) {
    constexpr std::string_view ctx = "generate";
    reject_unknown_keys(j, {"clips", "prefix", "base", "backgrounds", "specs"}, ctx);
    read_field(j, "clips", c.clips, ctx);
    read_field(j, "prefix", c.prefix, ctx);
    read_field(j, "base", c.base, ctx);
    read_field(j, "backgrounds", c.backgrounds, ctx);
    read_field(j, "specs", c.specs, ctx);
    if (c.clips < 0) throw ConfigError("generate.clips must be >= 0");
    for (const auto& b : c.backgrounds) data::parse_background(b);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
    j = nlohmann::json{{"model", c.model}, {"metrics", c.metrics},      {"generate", c.generate},
                       {"data", c.data},   {"eval_data", c.eval_data}, {"out", c.out}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
    constexpr std::string_view ctx = "config";
    reject_unknown_keys(j, {"model", "metrics", "generate", "data", "eval_data", "out"}, ctx);
    read_field(j, "model", c.model, ctx);
    read_field(j, "metrics", c.metrics, ctx);
    read_field(j, "generate", c.generate, ctx);
    read_field(j, "data", c.data, ctx);
    read_field(j, "eval_data", c.eval_data, ctx);
    read_field(j, "out", c.out, ctx);
}

RunConfig parse_run_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c = j.get<RunConfig>();
    c.model.validate();
    c.metrics.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return parse_run_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void echo_run_config(const RunConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / "run_config.json");
    if (!os) throw DataError("cannot write " + (dir / "run_config.json").string());
    os << nlohmann::json(config).dump(2) << '\n';
}

data::Dataset generate_dataset(const GenerateConfig& config) {
    std::vector<data::ClipSpec> specs = config.specs;
    if (specs.empty()) {
        for (int i = 0; i < config.clips; ++i) {
            data::ClipSpec s = config.base;
            s.seed = config.base.seed + static_cast<std::uint64_t>(i);
            if (!config.backgrounds.empty())
                s.background = data::parse_background(config.backgrounds[i % config.backgrounds.size()]);
            specs.push_back(s);
        }
    }
    data::Dataset out;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "%s_%02zu", config.prefix.c_str(), i);
        out.push_back(data::make_clip(name, specs[i]));
    }
    return out;
}

}  // namespace dctnet::app
