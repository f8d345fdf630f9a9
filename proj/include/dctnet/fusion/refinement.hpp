#pragma once

#include <span>
#include <vector>

#include "dctnet/nn/blocks.hpp"

namespace dctnet::fusion {

using nn::Mode;

/// Layout of the refinement fusion module.
///   Full        main + two auxiliaries, auxiliaries fused first, then the main
///   NoDepth     main + one auxiliary (depth terms removed)
///   FlatConcat  main + two auxiliaries, all refined features concatenated at once
enum class RfmVariant { Full, NoDepth, FlatConcat };

/// Intermediate tensors of one refinement pass, for inspection.
struct RfmTrace {
    Tensor adapted_main;
    std::vector<Tensor> adapted_aux;
    Tensor pre_attention_main;  // BConv(...) before channel attention
    std::vector<Tensor> pre_attention_aux;
    Tensor refined_main;
    std::vector<Tensor> refined_aux;
    Tensor aux_fused;  // undefined for FlatConcat
    Tensor fused;
};

/// Refinement fusion: adapt every modality with BConv, refine the main
/// modality with its products against each auxiliary (and each auxiliary
/// against the main), select channels with attention, then fuse.
///
///   Z_main = CA(BConv(sum_m A_main * A_m + A_main))
///   Z_m    = CA(BConv(A_m * A_main + A_m))
///   F      = BConv([Z_main, BConv([Z_m...])])      (progressive)
///          = BConv([Z_main, Z_m...])               (flat concat)
class RefinementFusion {
public:
    RefinementFusion() = default;
    RefinementFusion(int channels, int ca_ratio, RfmVariant variant, Rng& rng);

    Tensor forward(const Tensor& main, std::span<const Tensor> aux, Mode mode);
    RfmTrace forward_traced(const Tensor& main, std::span<const Tensor> aux, Mode mode);
    void collect(const std::string& prefix, nn::ParameterList& out);

    RfmVariant variant() const { return variant_; }
    int aux_count() const { return static_cast<int>(adapt_aux.size()); }

    nn::BConv adapt_main;
    std::vector<nn::BConv> adapt_aux;
    nn::BConv refine_main;
    nn::ChannelAttention attention_main;
    std::vector<nn::BConv> refine_aux;
    std::vector<nn::ChannelAttention> attention_aux;
    nn::BConv aux_fuse;  // progressive variants only
    nn::BConv final_fuse;

private:
    RfmVariant variant_ = RfmVariant::Full;
};

/// Runs `rfm` on `inputs` = {main, aux...}, checking that the requested
/// variant matches how the module was built. Throws ConfigError otherwise.
Tensor rfm_forward_variant(RefinementFusion& rfm, std::span<const Tensor> inputs, RfmVariant variant, Mode mode);

/// Plain fusion without refinement: BConv([main, aux...]).
class ConcatFusion {
public:
    ConcatFusion() = default;
    ConcatFusion(int channels, int aux_count, Rng& rng);

    Tensor forward(const Tensor& main, std::span<const Tensor> aux, Mode mode);
    void collect(const std::string& prefix, nn::ParameterList& out);

    nn::BConv fuse;
};

}  // namespace dctnet::fusion
