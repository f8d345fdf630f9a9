#include "dctnet/fusion/refinement.hpp"

#include "dctnet/error.hpp"
#include "dctnet/fusion/attention.hpp"

namespace dctnet::fusion {

namespace {
int aux_count_for(RfmVariant v) { return v == RfmVariant::NoDepth ? 1 : 2; }

const char* variant_name(RfmVariant v) {
    switch (v) {
        case RfmVariant::Full: return "full";
        case RfmVariant::NoDepth: return "no_depth";
        case RfmVariant::FlatConcat: return "flat_concat";
    }
    return "?";
}
}  // namespace

RefinementFusion::RefinementFusion(int channels, int ca_ratio, RfmVariant variant, Rng& rng) : variant_(variant) {
    const int n_aux = aux_count_for(variant);
    adapt_main = nn::BConv(channels, channels, 3, rng);
    for (int i = 0; i < n_aux; ++i) adapt_aux.emplace_back(channels, channels, 3, rng);
    refine_main = nn::BConv(channels, channels, 3, rng);
    attention_main = nn::ChannelAttention(channels, ca_ratio, rng);
    for (int i = 0; i < n_aux; ++i) {
        refine_aux.emplace_back(channels, channels, 3, rng);
        attention_aux.emplace_back(channels, ca_ratio, rng);
    }
    if (variant == RfmVariant::FlatConcat) {
        final_fuse = nn::BConv((1 + n_aux) * channels, channels, 3, rng);
    } else {
        aux_fuse = nn::BConv(n_aux * channels, channels, 3, rng);
        final_fuse = nn::BConv(2 * channels, channels, 3, rng);
    }
}

RfmTrace RefinementFusion::forward_traced(const Tensor& main, std::span<const Tensor> aux, Mode mode) {
    require_same_shapes(main, aux, "refinement fusion");
    if (aux.size() != adapt_aux.size()) {
        throw ConfigError(std::string("refinement fusion (") + variant_name(variant_) + ") expects " +
                          std::to_string(adapt_aux.size()) + " auxiliary inputs, got " + std::to_string(aux.size()));
    }
    RfmTrace t;
    t.adapted_main = adapt_main.forward(main, mode);
    for (std::size_t i = 0; i < aux.size(); ++i) t.adapted_aux.push_back(adapt_aux[i].forward(aux[i], mode));

    Tensor acc;
    for (const auto& a : t.adapted_aux) {
        Tensor common = ops::mul(t.adapted_main, a);
        acc = acc.defined() ? ops::add(acc, common) : common;
    }
    t.pre_attention_main = refine_main.forward(ops::add(acc, t.adapted_main), mode);
    t.refined_main = attention_main.forward(t.pre_attention_main);

    for (std::size_t i = 0; i < aux.size(); ++i) {
        const Tensor& a = t.adapted_aux[i];
        t.pre_attention_aux.push_back(refine_aux[i].forward(ops::add(ops::mul(a, t.adapted_main), a), mode));
        t.refined_aux.push_back(attention_aux[i].forward(t.pre_attention_aux.back()));
    }

    if (variant_ == RfmVariant::FlatConcat) {
        std::vector<Tensor> parts{t.refined_main};
        parts.insert(parts.end(), t.refined_aux.begin(), t.refined_aux.end());
        t.fused = final_fuse.forward(ops::concat_channels(parts), mode);
    } else {
        t.aux_fused = aux_fuse.forward(ops::concat_channels(t.refined_aux), mode);
        t.fused = final_fuse.forward(ops::concat_channels({t.refined_main, t.aux_fused}), mode);
    }
    return t;
}

Tensor RefinementFusion::forward(const Tensor& main, std::span<const Tensor> aux, Mode mode) {
    return forward_traced(main, aux, mode).fused;
}

void RefinementFusion::collect(const std::string& prefix, nn::ParameterList& out) {
    using nn::join_name;
    constexpr auto g = nn::ParamGroup::Head;
    adapt_main.collect(join_name(prefix, "adapt_main"), g, out);
    for (std::size_t i = 0; i < adapt_aux.size(); ++i)
        adapt_aux[i].collect(join_name(prefix, "adapt_aux" + std::to_string(i)), g, out);
    refine_main.collect(join_name(prefix, "refine_main"), g, out);
    attention_main.collect(join_name(prefix, "ca_main"), g, out);
    for (std::size_t i = 0; i < refine_aux.size(); ++i) {
        refine_aux[i].collect(join_name(prefix, "refine_aux" + std::to_string(i)), g, out);
        attention_aux[i].collect(join_name(prefix, "ca_aux" + std::to_string(i)), g, out);
    }
    if (variant_ != RfmVariant::FlatConcat) aux_fuse.collect(join_name(prefix, "aux_fuse"), g, out);
    final_fuse.collect(join_name(prefix, "final_fuse"), g, out);
}

Tensor rfm_forward_variant(RefinementFusion& rfm, std::span<const Tensor> inputs, RfmVariant variant, Mode mode) {
    if (rfm.variant() != variant) {
        throw ConfigError(std::string("refinement fusion built as ") + variant_name(rfm.variant()) +
                          " cannot run as " + variant_name(variant));
    }
    if (inputs.size() != std::size_t(1 + aux_count_for(variant))) {
        throw ConfigError(std::string("variant ") + variant_name(variant) + " takes " +
                          std::to_string(1 + aux_count_for(variant)) + " modalities, got " +
                          std::to_string(inputs.size()));
    }
    return rfm.forward(inputs[0], inputs.subspan(1), mode);
}

ConcatFusion::ConcatFusion(int channels, int aux_count, Rng& rng) : fuse((1 + aux_count) * channels, channels, 3, rng) {}

Tensor ConcatFusion::forward(const Tensor& main, std::span<const Tensor> aux, Mode mode) {
    require_same_shapes(main, aux, "concat fusion");
    std::vector<Tensor> parts{main};
    parts.insert(parts.end(), aux.begin(), aux.end());
    return fuse.forward(ops::concat_channels(parts), mode);
}

void ConcatFusion::collect(const std::string& prefix, nn::ParameterList& out) {
    fuse.collect(nn::join_name(prefix, "fuse"), nn::ParamGroup::Head, out);
}

}  // namespace dctnet::fusion
