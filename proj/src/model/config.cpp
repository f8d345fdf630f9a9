#include "dctnet/model/config.hpp"

#include <algorithm>

#include "dctnet/error.hpp"
#include "dctnet/json_util.hpp"

namespace dctnet::model {

std::string_view variant_id(Variant v) {
    switch (v) {
        case Variant::Full: return "Ours";
        case Variant::A1_NoDepth: return "A1";
        case Variant::B1_DepthMain: return "B1";
        case Variant::B2_FlowMain: return "B2";
        case Variant::C1_NoMam: return "C1";
        case Variant::C2_SelfNonLocal: return "C2";
        case Variant::C3_NoRfm: return "C3";
        case Variant::C4_FlatConcat: return "C4";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    struct Alias {
        std::string_view name;
        Variant v;
    };
    static constexpr Alias aliases[] = {
        {"Ours", Variant::Full},           {"Full", Variant::Full},
        {"A1", Variant::A1_NoDepth},       {"A1_no_depth", Variant::A1_NoDepth},
        {"B1", Variant::B1_DepthMain},     {"B1_depth_main", Variant::B1_DepthMain},
        {"B2", Variant::B2_FlowMain},      {"B2_flow_main", Variant::B2_FlowMain},
        {"C1", Variant::C1_NoMam},         {"C1_no_mam", Variant::C1_NoMam},
        {"C2", Variant::C2_SelfNonLocal},  {"C2_self_nonlocal", Variant::C2_SelfNonLocal},
        {"C3", Variant::C3_NoRfm},         {"C3_no_rfm", Variant::C3_NoRfm},
        {"C4", Variant::C4_FlatConcat},    {"C4_flat_concat", Variant::C4_FlatConcat},
    };
    for (const auto& a : aliases)
        if (a.name == name) return a.v;
    throw ConfigError("unknown variant \"" + std::string(name) + "\"");
}

void ModelConfig::validate() const {
    if (input_size <= 0 || input_size % 32 != 0) {
        throw ConfigError("input_size must be a positive multiple of 32, got " + std::to_string(input_size));
    }
    if (encoder_width < 1 || cp_width < 2) throw ConfigError("encoder_width must be >= 1 and cp_width >= 2");
    if (ca_ratio < 1 || cp_width % ca_ratio != 0) {
        throw ConfigError("cp_width (" + std::to_string(cp_width) + ") must be divisible by ca_ratio (" +
                          std::to_string(ca_ratio) + ")");
    }
    if (aspp_rates.empty() || std::any_of(aspp_rates.begin(), aspp_rates.end(), [](int r) { return r < 1; })) {
        throw ConfigError("aspp_rates must be a non-empty list of positive dilations");
    }
    if (lr_backbone < 0 || lr_head < 0 || momentum < 0 || momentum >= 1 || weight_decay < 0) {
        throw ConfigError("learning rates and weight decay must be >= 0 and momentum in [0,1)");
    }
    if (batch_size < 1 || steps < 0) throw ConfigError("batch_size must be >= 1 and steps >= 0");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"input_size", c.input_size},   {"encoder_width", c.encoder_width},
                       {"cp_width", c.cp_width},       {"ca_ratio", c.ca_ratio},
                       {"aspp_rates", c.aspp_rates},   {"variant", std::string(variant_id(c.variant))},
                       {"seed", c.seed},               {"lr_backbone", c.lr_backbone},
                       {"lr_head", c.lr_head},         {"momentum", c.momentum},
                       {"weight_decay", c.weight_decay}, {"batch_size", c.batch_size},
                       {"steps", c.steps}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    constexpr std::string_view ctx = "model";
    reject_unknown_keys(j,
                        {"input_size", "encoder_width", "cp_width", "ca_ratio", "aspp_rates", "variant", "seed",
                         "lr_backbone", "lr_head", "momentum", "weight_decay", "batch_size", "steps"},
                        ctx);
    read_field(j, "input_size", c.input_size, ctx);
    read_field(j, "encoder_width", c.encoder_width, ctx);
    read_field(j, "cp_width", c.cp_width, ctx);
    read_field(j, "ca_ratio", c.ca_ratio, ctx);
    read_field(j, "aspp_rates", c.aspp_rates, ctx);
    std::string variant(variant_id(c.variant));
    read_field(j, "variant", variant, ctx);
    c.variant = parse_variant(variant);
    read_field(j, "seed", c.seed, ctx);
    read_field(j, "lr_backbone", c.lr_backbone, ctx);
    read_field(j, "lr_head", c.lr_head, ctx);
    read_field(j, "momentum", c.momentum, ctx);
    read_field(j, "weight_decay", c.weight_decay, ctx);
    read_field(j, "batch_size", c.batch_size, ctx);
    read_field(j, "steps", c.steps, ctx);
}

}  // namespace dctnet::model
