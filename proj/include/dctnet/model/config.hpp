#pragma once

#include <array>
#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <string_view>
#include <vector>

namespace dctnet::model {

/// Architecture variants. Identifiers follow the ablation table rows.
enum class Variant {
    Full,             // "Ours": RGB main, MAM at levels 3-5, RFM everywhere
    A1_NoDepth,       // depth stream and all depth terms removed
    B1_DepthMain,     // depth as the main modality
    B2_FlowMain,      // optical flow as the main modality
    C1_NoMam,         // MAM removed
    C2_SelfNonLocal,  // MAM replaced by three single-modality non-local blocks
    C3_NoRfm,         // RFM replaced by concatenation + BConv
    C4_FlatConcat,    // RFM with flat concatenation instead of progressive fusion
};

inline constexpr std::array<Variant, 8> kAllVariants{
    Variant::A1_NoDepth, Variant::B1_DepthMain, Variant::B2_FlowMain,  Variant::C1_NoMam,
    Variant::C2_SelfNonLocal, Variant::C3_NoRfm, Variant::C4_FlatConcat, Variant::Full,
};

/// Table row identifier: "Ours", "A1", "B1", ...
std::string_view variant_id(Variant v);
/// Accepts table identifiers, "Full", and enum-style names such as "A1_no_depth".
Variant parse_variant(std::string_view name);

struct ModelConfig {
    int input_size = 64;  // square inputs, multiple of 32
    int encoder_width = 16;
    int cp_width = 16;
    int ca_ratio = 4;
    std::vector<int> aspp_rates{1, 2, 4, 8};
    Variant variant = Variant::Full;
    std::uint64_t seed = 0;

    double lr_backbone = 1e-4;
    double lr_head = 1e-3;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int batch_size = 4;
    int steps = 500;

    /// Throws ConfigError on invalid combinations.
    void validate() const;
};

// JSON conversion. Parsing rejects unknown keys; absent keys keep defaults.
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace dctnet::model
