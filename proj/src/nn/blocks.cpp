#include "dctnet/nn/blocks.hpp"

#include <cmath>

#include "dctnet/error.hpp"

namespace dctnet::nn {

std::size_t ParameterList::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
}

Tensor fan_in_uniform(Shape shape, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / double(fan_in));
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.uniform(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, Rng& rng, bool with_bias, ops::Conv2dParams p)
    : params(p) {
    const int fan_in = in_channels * kernel * kernel;
    weight = fan_in_uniform({out_channels, in_channels, kernel, kernel}, fan_in, rng);
    if (with_bias) bias = fan_in_uniform({out_channels}, fan_in, rng);
}

Tensor Conv2d::forward(const Tensor& x) const { return ops::conv2d(x, weight, bias, params); }

void Conv2d::collect(const std::string& prefix, ParamGroup group, ParameterList& out) const {
    out.params.push_back({join_name(prefix, "weight"), weight, group});
    if (bias.defined()) out.params.push_back({join_name(prefix, "bias"), bias, group});
}

Linear::Linear(int in_features, int out_features, Rng& rng)
    : weight(fan_in_uniform({out_features, in_features}, in_features, rng)),
      bias(fan_in_uniform({out_features}, in_features, rng)) {}

Tensor Linear::forward(const Tensor& x) const { return ops::linear(x, weight, bias); }

void Linear::collect(const std::string& prefix, ParamGroup group, ParameterList& out) const {
    out.params.push_back({join_name(prefix, "weight"), weight, group});
    out.params.push_back({join_name(prefix, "bias"), bias, group});
}

BatchNorm2d::BatchNorm2d(int channels)
    : gamma(Tensor::full({channels}, 1.0, true)), beta(Tensor::zeros({channels}, true)), stats(channels) {}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) { return ops::batchnorm2d(x, gamma, beta, stats, mode); }

void BatchNorm2d::collect(const std::string& prefix, ParamGroup group, ParameterList& out) {
    out.params.push_back({join_name(prefix, "gamma"), gamma, group});
    out.params.push_back({join_name(prefix, "beta"), beta, group});
    out.buffers.push_back({join_name(prefix, "running_mean"), &stats.mean});
    out.buffers.push_back({join_name(prefix, "running_var"), &stats.var});
}

BConv::BConv(int in_channels, int out_channels, int kernel, Rng& rng, int stride, int dilation)
    : conv(in_channels, out_channels, kernel, rng, false,
           ops::Conv2dParams{stride, dilation, dilation * (kernel - 1) / 2}),
      bn(out_channels) {}

Tensor BConv::forward(const Tensor& x, Mode mode) {
    if (x.rank() != 4 || x.dim(1) != conv.in_channels()) {
        throw DimensionError("BConv: expected " + std::to_string(conv.in_channels()) + " input channels, got " +
                             shape_str(x.shape()));
    }
    return ops::relu(bn.forward(conv.forward(x), mode));
}

void BConv::collect(const std::string& prefix, ParamGroup group, ParameterList& out) {
    conv.collect(join_name(prefix, "conv"), group, out);
    bn.collect(join_name(prefix, "bn"), group, out);
}

ChannelAttention::ChannelAttention(int channels, int reduction, Rng& rng) {
    if (reduction < 1 || channels % reduction != 0) {
        throw ConfigError("channel attention: " + std::to_string(channels) + " channels not divisible by reduction " +
                          std::to_string(reduction));
    }
    squeeze = Linear(channels, channels / reduction, rng);
    excite = Linear(channels / reduction, channels, rng);
}

Tensor ChannelAttention::weights(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(1) != squeeze.weight.dim(1)) {
        throw DimensionError("channel attention: expected " + std::to_string(squeeze.weight.dim(1)) +
                             " channels, got " + shape_str(x.shape()));
    }
    return ops::sigmoid(excite.forward(ops::relu(squeeze.forward(ops::global_avg_pool(x)))));
}

Tensor ChannelAttention::forward(const Tensor& x) const { return ops::scale_channels(x, weights(x)); }

void ChannelAttention::collect(const std::string& prefix, ParamGroup group, ParameterList& out) const {
    squeeze.collect(join_name(prefix, "squeeze"), group, out);
    excite.collect(join_name(prefix, "excite"), group, out);
}

Aspp::Aspp(int in_channels, int width, std::vector<int> rates, Rng& rng) : rates_(std::move(rates)) {
    if (rates_.empty()) throw ConfigError("ASPP needs at least one dilation rate");
    for (int r : rates_) {
        if (r < 1) throw ConfigError("ASPP dilation rates must be >= 1");
        branches.emplace_back(in_channels, width, 3, rng, 1, r);
    }
    pool_proj = Linear(in_channels, width, rng);
    merge = BConv(width * static_cast<int>(rates_.size() + 1), width, 1, rng);
}

Tensor Aspp::forward(const Tensor& x, Mode mode) {
    std::vector<Tensor> parts;
    parts.reserve(branches.size() + 1);
    for (auto& b : branches) parts.push_back(b.forward(x, mode));
    // The pooled branch has a single spatial position, so it skips BatchNorm.
    Tensor pooled = ops::relu(pool_proj.forward(ops::global_avg_pool(x)));
    parts.push_back(ops::expand_spatial(pooled, x.dim(2), x.dim(3)));
    return merge.forward(ops::concat_channels(parts), mode);
}

void Aspp::collect(const std::string& prefix, ParamGroup group, ParameterList& out) {
    for (std::size_t i = 0; i < branches.size(); ++i)
        branches[i].collect(join_name(prefix, "branch" + std::to_string(i)), group, out);
    pool_proj.collect(join_name(prefix, "pool"), group, out);
    merge.collect(join_name(prefix, "merge"), group, out);
}

}  // namespace dctnet::nn
