#pragma once

#include <array>
#include <vector>

#include "dctnet/nn/blocks.hpp"

namespace dctnet::nn {

inline constexpr int kLevels = 5;
/// Input height and width must be multiples of 2^kLevels.
inline constexpr int kSpatialDivisor = 32;

/// Five feature maps of one modality, finest first (index 0 is level 1).
struct FeaturePyramid {
    std::array<Tensor, kLevels> levels;

    const Tensor& level(int i) const { return levels.at(static_cast<std::size_t>(i - 1)); }
};

/// Two 3x3 convolutions with an identity or projected shortcut.
class BasicBlock {
public:
    BasicBlock() = default;
    BasicBlock(int in_channels, int out_channels, int stride, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode);
    void collect(const std::string& prefix, ParamGroup group, ParameterList& out);

    BConv conv1;
    Conv2d conv2;
    BatchNorm2d bn2;
    bool projected = false;
    Conv2d shortcut;
    BatchNorm2d shortcut_bn;
};

struct EncoderConfig {
    int width = 16;     // stem width; stages use (w, 2w, 4w, 8w)
    int cp_width = 16;  // channels of every level after compression
    std::vector<int> aspp_rates{1, 2, 4, 8};
    int blocks_per_stage = 2;
};

/// Residual encoder for one modality: a stride-2 stem then four stride-2
/// stages, ASPP on the deepest level, and per-level channel compression.
class EncoderStream {
public:
    EncoderStream() = default;
    EncoderStream(const EncoderConfig& config, Rng& rng);

    /// Throws ConfigError when H or W is not a multiple of 32.
    FeaturePyramid forward(const Tensor& image, Mode mode);
    /// Stem/stage outputs before ASPP and compression.
    FeaturePyramid backbone(const Tensor& image, Mode mode);

    /// Backbone parameters (stem and stages) go to ParamGroup::Backbone; ASPP
    /// and compression go to ParamGroup::Head.
    void collect(const std::string& prefix, ParameterList& out);

    BConv stem;
    std::array<std::vector<BasicBlock>, 4> stages;
    Aspp aspp;
    std::array<BConv, kLevels> compress;
};

void check_spatial_divisibility(const Tensor& image);

}  // namespace dctnet::nn
