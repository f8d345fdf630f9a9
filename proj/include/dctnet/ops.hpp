#pragma once

#include <span>
#include <vector>

#include "dctnet/tensor.hpp"

// Differentiable primitives. Every op computes its forward result eagerly and,
// when a tape is active and some input requires grad, records a backward rule.
// Feature maps are channel-first: [batch, channels, height, width].
namespace dctnet::ops {

enum class Mode { Train, Eval };

// Elementwise (identical shapes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);  // derivative at exactly 0 is 0
Tensor sigmoid(const Tensor& x);

// Reductions to a scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// [M,K]x[K,N] -> [M,N], or batched [B,M,K]x[B,K,N] -> [B,M,N].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Swaps the last two axes of a rank-2 or rank-3 tensor.
Tensor transpose_last2(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

struct Conv2dParams {
    int stride = 1;
    int dilation = 1;
    int padding = 0;
};

/// Output extent of a convolution along one axis; may be <= 0 for invalid
/// configurations.
int conv_out_extent(int in, int kernel, const Conv2dParams& p);

/// Cross-correlation. `bias` may be undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv2dParams& params);

struct RunningStats {
    std::vector<double> mean;
    std::vector<double> var;
    explicit RunningStats(int channels = 0) : mean(channels, 0.0), var(channels, 1.0) {}
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Train mode normalizes with batch statistics (biased variance) and updates
/// `stats` (unbiased variance); eval mode normalizes with `stats`.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, RunningStats& stats, Mode mode,
                   double eps = kBatchNormEps, double momentum = kBatchNormMomentum);

/// Softmax over the last axis, with per-row max subtraction.
Tensor softmax_rows(const Tensor& x);

Tensor concat_channels(std::span<const Tensor> parts);
Tensor concat_channels(std::initializer_list<Tensor> parts);

/// [B,C,H,W] -> [B,C]
Tensor global_avg_pool(const Tensor& x);
/// y[b,c,:,:] = s[b,c] * x[b,c,:,:]
Tensor scale_channels(const Tensor& x, const Tensor& s);
/// [B,C] -> [B,C,H,W] by replication.
Tensor expand_spatial(const Tensor& x, int height, int width);
/// y = x W^T + b with x [B,In], W [Out,In], b [Out] (b may be undefined).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Bilinear resampling with half-pixel centers (align_corners = false).
Tensor resize_bilinear(const Tensor& x, int out_height, int out_width);
Tensor upsample_bilinear_x2(const Tensor& x);

Tensor max_pool2d(const Tensor& x, int kernel, int stride);

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy of probabilities `p` against targets `g`.
/// Probabilities are clamped to [1e-7, 1 - 1e-7]; the clamp has zero slope.
Tensor bce_mean(const Tensor& p, const Tensor& g);

/// Soft IoU loss 1 - (sum pg + eps) / (sum p + sum g - sum pg + eps), computed
/// per batch item and averaged. `g` is constant.
Tensor iou_loss(const Tensor& p, const Tensor& g, double eps);

bool all_finite(const Tensor& x);

}  // namespace dctnet::ops
