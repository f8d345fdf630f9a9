#pragma once

#include <string>
#include <vector>

#include "dctnet/ops.hpp"
#include "dctnet/random.hpp"
#include "dctnet/tensor.hpp"

namespace dctnet::nn {

using ops::Mode;

enum class ParamGroup { Backbone, Head };

struct ParamRef {
    std::string name;
    Tensor tensor;
    ParamGroup group;
};

struct BufferRef {
    std::string name;
    std::vector<double>* values;
};

/// Flat, ordered view of a module tree's learnable parameters and buffers.
struct ParameterList {
    std::vector<ParamRef> params;
    std::vector<BufferRef> buffers;

    std::size_t scalar_count() const;
};

inline std::string join_name(const std::string& prefix, const std::string& leaf) {
    return prefix.empty() ? leaf : prefix + "." + leaf;
}

/// Uniform in +-sqrt(6 / fan_in).
Tensor fan_in_uniform(Shape shape, int fan_in, Rng& rng);

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel, Rng& rng, bool with_bias = true,
           ops::Conv2dParams params = {});

    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, ParamGroup group, ParameterList& out) const;

    int in_channels() const { return weight.dim(1); }
    int out_channels() const { return weight.dim(0); }

    Tensor weight;
    Tensor bias;  // undefined when built without bias
    ops::Conv2dParams params;
};

class Linear {
public:
    Linear() = default;
    Linear(int in_features, int out_features, Rng& rng);

    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, ParamGroup group, ParameterList& out) const;

    Tensor weight;
    Tensor bias;
};

class BatchNorm2d {
public:
    BatchNorm2d() = default;
    explicit BatchNorm2d(int channels);

    Tensor forward(const Tensor& x, Mode mode);
    void collect(const std::string& prefix, ParamGroup group, ParameterList& out);

    Tensor gamma;
    Tensor beta;
    ops::RunningStats stats;
};

/// Convolution -> BatchNorm -> ReLU with same-padding. The convolution has no
/// bias; BatchNorm's beta plays that role.
class BConv {
public:
    BConv() = default;
    BConv(int in_channels, int out_channels, int kernel, Rng& rng, int stride = 1, int dilation = 1);

    Tensor forward(const Tensor& x, Mode mode);
    void collect(const std::string& prefix, ParamGroup group, ParameterList& out);

    int out_channels() const { return conv.out_channels(); }

    Conv2d conv;
    BatchNorm2d bn;
};

/// Squeeze-and-excitation channel attention:
/// s = sigmoid(W2 relu(W1 gap(x))), y = s * x per channel.
class ChannelAttention {
public:
    ChannelAttention() = default;
    /// Throws ConfigError unless channels % reduction == 0.
    ChannelAttention(int channels, int reduction, Rng& rng);

    Tensor forward(const Tensor& x) const;
    /// The per-channel scaling factors, [B,C].
    Tensor weights(const Tensor& x) const;
    void collect(const std::string& prefix, ParamGroup group, ParameterList& out) const;

    Linear squeeze;
    Linear excite;
};

/// Atrous spatial pyramid pooling: parallel dilated BConv branches plus a
/// global-pool branch, merged by a 1x1 BConv.
class Aspp {
public:
    Aspp() = default;
    Aspp(int in_channels, int width, std::vector<int> rates, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode);
    void collect(const std::string& prefix, ParamGroup group, ParameterList& out);

    const std::vector<int>& rates() const { return rates_; }

    std::vector<BConv> branches;
    Linear pool_proj;
    BConv merge;

private:
    std::vector<int> rates_;
};

}  // namespace dctnet::nn
