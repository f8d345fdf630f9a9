#pragma once

#include <array>
#include <optional>
#include <vector>

#include "dctnet/fusion/attention.hpp"
#include "dctnet/fusion/refinement.hpp"
#include "dctnet/model/config.hpp"
#include "dctnet/nn/encoder.hpp"

namespace dctnet::model {

using nn::kLevels;
using nn::Mode;

enum class Modality { Rgb = 0, Depth = 1, Flow = 2 };

std::string_view modality_name(Modality m);

/// Per-level saliency logits from the decoder, finest first (index 0 is S_1).
struct SideOutputs {
    std::array<Tensor, kLevels> logits;

    const Tensor& level(int i) const { return logits.at(static_cast<std::size_t>(i - 1)); }
};

/// Optional record of the intermediate features of one forward pass.
struct ForwardTrace {
    std::array<std::optional<nn::FeaturePyramid>, 3> pyramids;  // indexed by Modality
    std::array<Tensor, kLevels> fused;                           // F_1..F_5
    std::vector<int> attention_levels;  // levels where MAM or self non-local ran
    std::vector<Tensor> affinities;     // every attention matrix, in call order
    std::array<Tensor, kLevels> decoder;
};

/// Three-stream encoder-decoder with multi-modal attention on levels 3-5,
/// refinement fusion on every level and a U-Net decoder with deep
/// supervision. The variant in the config selects the ablation wiring.
class DctNet {
public:
    /// Levels (1-based) that carry an attention module.
    static constexpr std::array<int, 3> kAttentionLevels{3, 4, 5};

    explicit DctNet(const ModelConfig& config);

    /// rgb and flow are [B,3,H,W]; depth is [B,1,H,W] or [B,3,H,W]. depth is
    /// ignored (and may be undefined) for the no-depth variant.
    SideOutputs forward(const Tensor& rgb, const Tensor& depth, const Tensor& flow, Mode mode,
                        ForwardTrace* trace = nullptr);

    nn::ParameterList parameters();
    const ModelConfig& config() const { return config_; }

    /// Modalities used by this variant, main first.
    const std::vector<Modality>& modality_order() const { return order_; }
    bool has_stream(Modality m) const { return streams_[static_cast<std::size_t>(m)].has_value(); }
    nn::EncoderStream& stream(Modality m);

private:
    bool uses_mam() const;
    bool uses_self_nonlocal() const;

    ModelConfig config_;
    std::vector<Modality> order_;
    std::array<std::optional<nn::EncoderStream>, 3> streams_;
    std::vector<fusion::MultiModalAttention> mam_;     // one per attention level
    std::vector<std::vector<fusion::SelfNonLocal>> self_nl_;  // [level][modality position]
    std::vector<fusion::RefinementFusion> rfm_;        // one per level
    std::vector<fusion::ConcatFusion> concat_;         // one per level (C3)
    std::array<nn::BConv, kLevels> decoder_;
    std::array<nn::Conv2d, kLevels> heads_;
};

}  // namespace dctnet::model
