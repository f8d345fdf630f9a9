#pragma once

#include <span>
#include <vector>

#include "dctnet/nn/blocks.hpp"

namespace dctnet::fusion {

using nn::Mode;

/// Row-stochastic affinity softmax(theta^T phi) between all spatial positions.
/// theta, phi: [B,E,H,W] -> [B,HW,HW].
Tensor spatial_affinity(const Tensor& theta, const Tensor& phi);

/// Propagates `value` [B,C,H,W] through affinity [B,HW,HW]: row i of the
/// result is sum_j A[i,j] value[:,j].
Tensor attend(const Tensor& affinity, const Tensor& value);

/// One main/auxiliary pair inside the multi-modal attention module.
struct CrossModalBranch {
    nn::BConv hybrid;       // [main, aux] -> hybrid embedding
    nn::Conv2d theta;       // query embedding, C/2 channels
    nn::Conv2d phi;         // key embedding, C/2 channels
    nn::Conv2d value_main;  // value embedding of the main modality
    nn::Conv2d value_aux;   // value embedding of the auxiliary modality
    nn::Conv2d out_main;    // 1x1 conv after the main attention product
    nn::Conv2d out_aux;     // 1x1 conv after the auxiliary attention product

    CrossModalBranch() = default;
    CrossModalBranch(int channels, Rng& rng);
    void collect(const std::string& prefix, nn::ParameterList& out);
};

struct MamOutput {
    Tensor main;                   // aggregated main-modality features
    std::vector<Tensor> aux;       // enhanced auxiliary features, input order
    std::vector<Tensor> affinity;  // one [B,HW,HW] matrix per auxiliary
};

/// Multi-modal attention: an affinity matrix computed on the fused
/// main+auxiliary embedding attends the value embeddings of both streams.
///
/// For each auxiliary m: A = softmax(theta(H) phi(H)^T) with H = BConv([x_main, x_m]);
/// y_m = x_m + out_aux(A g_aux(x_m)); the main output is
/// BConv([x_main + out_main(A g_main(x_main))]_m) over all auxiliaries.
class MultiModalAttention {
public:
    MultiModalAttention() = default;
    MultiModalAttention(int channels, int aux_count, Rng& rng);

    MamOutput forward(const Tensor& main, std::span<const Tensor> aux, Mode mode);
    void collect(const std::string& prefix, nn::ParameterList& out);

    int aux_count() const { return static_cast<int>(branches.size()); }

    std::vector<CrossModalBranch> branches;
    nn::BConv aggregate;
};

/// Single-modality non-local block: y = x + out(A g(x)), A = softmax(theta(x) phi(x)^T).
class SelfNonLocal {
public:
    SelfNonLocal() = default;
    SelfNonLocal(int channels, Rng& rng);

    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, nn::ParameterList& out) const;

    nn::Conv2d theta, phi, value, out;
};

void require_same_shapes(const Tensor& main, std::span<const Tensor> aux, const char* where);

}  // namespace dctnet::fusion
