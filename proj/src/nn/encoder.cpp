#include "dctnet/nn/encoder.hpp"

#include "dctnet/error.hpp"

namespace dctnet::nn {

BasicBlock::BasicBlock(int in_channels, int out_channels, int stride, Rng& rng)
    : conv1(in_channels, out_channels, 3, rng, stride),
      conv2(out_channels, out_channels, 3, rng, false, ops::Conv2dParams{1, 1, 1}),
      bn2(out_channels),
      projected(stride != 1 || in_channels != out_channels) {
    if (projected) {
        shortcut = Conv2d(in_channels, out_channels, 1, rng, false, ops::Conv2dParams{stride, 1, 0});
        shortcut_bn = BatchNorm2d(out_channels);
    }
}

Tensor BasicBlock::forward(const Tensor& x, Mode mode) {
    Tensor main = bn2.forward(conv2.forward(conv1.forward(x, mode)), mode);
    Tensor skip = projected ? shortcut_bn.forward(shortcut.forward(x), mode) : x;
    return ops::relu(ops::add(main, skip));
}

void BasicBlock::collect(const std::string& prefix, ParamGroup group, ParameterList& out) {
    conv1.collect(join_name(prefix, "conv1"), group, out);
    conv2.collect(join_name(prefix, "conv2"), group, out);
    bn2.collect(join_name(prefix, "bn2"), group, out);
    if (projected) {
        shortcut.collect(join_name(prefix, "shortcut"), group, out);
        shortcut_bn.collect(join_name(prefix, "shortcut_bn"), group, out);
    }
}

EncoderStream::EncoderStream(const EncoderConfig& config, Rng& rng) {
    if (config.width < 1 || config.cp_width < 1 || config.blocks_per_stage < 1) {
        throw ConfigError("encoder widths and block counts must be positive");
    }
    const int w = config.width;
    stem = BConv(3, w, 3, rng, 2);
    const std::array<int, 4> widths{w, 2 * w, 4 * w, 8 * w};
    int in = w;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        for (int b = 0; b < config.blocks_per_stage; ++b) {
            stages[s].emplace_back(in, widths[s], b == 0 ? 2 : 1, rng);
            in = widths[s];
        }
    }
    aspp = Aspp(widths[3], config.cp_width, config.aspp_rates, rng);
    const std::array<int, kLevels> level_channels{w, widths[0], widths[1], widths[2], config.cp_width};
    for (std::size_t i = 0; i < compress.size(); ++i) compress[i] = BConv(level_channels[i], config.cp_width, 1, rng);
}

void check_spatial_divisibility(const Tensor& image) {
    if (image.rank() != 4) throw DimensionError("encoder input must be [B,3,H,W], got " + shape_str(image.shape()));
    if (image.dim(2) % kSpatialDivisor != 0 || image.dim(3) % kSpatialDivisor != 0 || image.dim(2) == 0 ||
        image.dim(3) == 0) {
        throw ConfigError("input height and width must be positive multiples of " + std::to_string(kSpatialDivisor) +
                          ", got " + std::to_string(image.dim(2)) + "x" + std::to_string(image.dim(3)));
    }
}

FeaturePyramid EncoderStream::backbone(const Tensor& image, Mode mode) {
    check_spatial_divisibility(image);
    if (image.dim(1) != 3) throw DimensionError("encoder input must have 3 channels, got " + shape_str(image.shape()));
    FeaturePyramid out;
    Tensor x = stem.forward(image, mode);
    out.levels[0] = x;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        for (auto& block : stages[s]) x = block.forward(x, mode);
        out.levels[s + 1] = x;
    }
    return out;
}

FeaturePyramid EncoderStream::forward(const Tensor& image, Mode mode) {
    FeaturePyramid raw = backbone(image, mode);
    raw.levels[kLevels - 1] = aspp.forward(raw.levels[kLevels - 1], mode);
    FeaturePyramid out;
    for (std::size_t i = 0; i < compress.size(); ++i) out.levels[i] = compress[i].forward(raw.levels[i], mode);
    return out;
}

void EncoderStream::collect(const std::string& prefix, ParameterList& out) {
    stem.collect(join_name(prefix, "stem"), ParamGroup::Backbone, out);
    for (std::size_t s = 0; s < stages.size(); ++s)
        for (std::size_t b = 0; b < stages[s].size(); ++b)
            stages[s][b].collect(join_name(prefix, "stage" + std::to_string(s + 1) + ".block" + std::to_string(b)),
                                 ParamGroup::Backbone, out);
    aspp.collect(join_name(prefix, "aspp"), ParamGroup::Head, out);
    for (std::size_t i = 0; i < compress.size(); ++i)
        compress[i].collect(join_name(prefix, "cp" + std::to_string(i + 1)), ParamGroup::Head, out);
}

}  // namespace dctnet::nn
