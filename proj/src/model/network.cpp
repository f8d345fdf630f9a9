#include "dctnet/model/network.hpp"

#include <algorithm>

#include "dctnet/error.hpp"

namespace dctnet::model {

std::string_view modality_name(Modality m) {
    switch (m) {
        case Modality::Rgb: return "rgb";
        case Modality::Depth: return "depth";
        case Modality::Flow: return "flow";
    }
    return "?";
}

namespace {

std::vector<Modality> order_for(Variant v) {
    switch (v) {
        case Variant::A1_NoDepth: return {Modality::Rgb, Modality::Flow};
        case Variant::B1_DepthMain: return {Modality::Depth, Modality::Rgb, Modality::Flow};
        case Variant::B2_FlowMain: return {Modality::Flow, Modality::Rgb, Modality::Depth};
        default: return {Modality::Rgb, Modality::Depth, Modality::Flow};
    }
}

fusion::RfmVariant rfm_variant_for(Variant v) {
    if (v == Variant::A1_NoDepth) return fusion::RfmVariant::NoDepth;
    if (v == Variant::C4_FlatConcat) return fusion::RfmVariant::FlatConcat;
    return fusion::RfmVariant::Full;
}

bool is_attention_level(int level) {
    return std::find(DctNet::kAttentionLevels.begin(), DctNet::kAttentionLevels.end(), level) !=
           DctNet::kAttentionLevels.end();
}

}  // namespace

DctNet::DctNet(const ModelConfig& config) : config_(config), order_(order_for(config.variant)) {
    config_.validate();
    Rng rng(config_.seed);
    const nn::EncoderConfig enc{config_.encoder_width, config_.cp_width, config_.aspp_rates, 2};
    for (Modality m : {Modality::Rgb, Modality::Depth, Modality::Flow}) {
        if (std::find(order_.begin(), order_.end(), m) != order_.end())
            streams_[static_cast<std::size_t>(m)].emplace(enc, rng);
    }
    const int c = config_.cp_width;
    const int n_aux = static_cast<int>(order_.size()) - 1;
    for (std::size_t i = 0; i < kAttentionLevels.size(); ++i) {
        if (uses_mam()) mam_.emplace_back(c, n_aux, rng);
        if (uses_self_nonlocal()) {
            std::vector<fusion::SelfNonLocal> blocks;
            for (std::size_t k = 0; k < order_.size(); ++k) blocks.emplace_back(c, rng);
            self_nl_.push_back(std::move(blocks));
        }
    }
    for (int level = 1; level <= kLevels; ++level) {
        if (config_.variant == Variant::C3_NoRfm) {
            concat_.emplace_back(c, n_aux, rng);
        } else {
            rfm_.emplace_back(c, config_.ca_ratio, rfm_variant_for(config_.variant), rng);
        }
    }
    for (int level = 1; level <= kLevels; ++level) {
        const int in = level == kLevels ? c : 2 * c;
        decoder_[level - 1] = nn::BConv(in, c, 3, rng);
        heads_[level - 1] = nn::Conv2d(c, 1, 3, rng, true, ops::Conv2dParams{1, 1, 1});
    }
}

bool DctNet::uses_mam() const {
    return config_.variant != Variant::C1_NoMam && config_.variant != Variant::C2_SelfNonLocal;
}

bool DctNet::uses_self_nonlocal() const { return config_.variant == Variant::C2_SelfNonLocal; }

nn::EncoderStream& DctNet::stream(Modality m) {
    auto& s = streams_[static_cast<std::size_t>(m)];
    if (!s) throw ConfigError("variant " + std::string(variant_id(config_.variant)) + " has no " +
                              std::string(modality_name(m)) + " stream");
    return *s;
}

SideOutputs DctNet::forward(const Tensor& rgb, const Tensor& depth, const Tensor& flow, Mode mode,
                            ForwardTrace* trace) {
    std::array<Tensor, 3> inputs{rgb, depth, flow};
    Tensor& d = inputs[static_cast<std::size_t>(Modality::Depth)];
    if (has_stream(Modality::Depth)) {
        if (!d.defined()) throw DimensionError("depth input required for variant " + std::string(variant_id(config_.variant)));
        if (d.rank() == 4 && d.dim(1) == 1) d = ops::concat_channels({d, d, d});
    }
    const Tensor& reference = inputs[static_cast<std::size_t>(order_[0])];
    if (!reference.defined() || reference.rank() != 4) throw DimensionError("model inputs must be [B,C,H,W]");
    for (Modality m : order_) {
        const Tensor& x = inputs[static_cast<std::size_t>(m)];
        if (!x.defined() || x.rank() != 4 || x.dim(1) != 3 || x.dim(0) != reference.dim(0) ||
            x.dim(2) != reference.dim(2) || x.dim(3) != reference.dim(3)) {
            throw DimensionError(std::string(modality_name(m)) + " input " +
                                 (x.defined() ? shape_str(x.shape()) : std::string("<undefined>")) +
                                 " does not match the other modalities");
        }
    }

    std::vector<nn::FeaturePyramid> pyramids;
    for (Modality m : order_) {
        pyramids.push_back(stream(m).forward(inputs[static_cast<std::size_t>(m)], mode));
        if (trace) trace->pyramids[static_cast<std::size_t>(m)] = pyramids.back();
    }

    std::array<Tensor, kLevels> fused;
    for (int level = 1; level <= kLevels; ++level) {
        std::vector<Tensor> feats;
        for (const auto& p : pyramids) feats.push_back(p.level(level));
        if (is_attention_level(level)) {
            const std::size_t slot = static_cast<std::size_t>(level - kAttentionLevels[0]);
            if (uses_mam()) {
                fusion::MamOutput out = mam_[slot].forward(feats[0], std::span<const Tensor>(feats).subspan(1), mode);
                feats[0] = out.main;
                for (std::size_t k = 0; k < out.aux.size(); ++k) feats[k + 1] = out.aux[k];
                if (trace) trace->affinities.insert(trace->affinities.end(), out.affinity.begin(), out.affinity.end());
                if (trace) trace->attention_levels.push_back(level);
            } else if (uses_self_nonlocal()) {
                for (std::size_t k = 0; k < feats.size(); ++k) feats[k] = self_nl_[slot][k].forward(feats[k]);
                if (trace) trace->attention_levels.push_back(level);
            }
        }
        const std::span<const Tensor> aux = std::span<const Tensor>(feats).subspan(1);
        fused[level - 1] = concat_.empty() ? rfm_[level - 1].forward(feats[0], aux, mode)
                                           : concat_[level - 1].forward(feats[0], aux, mode);
    }

    SideOutputs out;
    Tensor state;
    for (int level = kLevels; level >= 1; --level) {
        const Tensor& f = fused[level - 1];
        Tensor in = level == kLevels ? f : ops::concat_channels({f, ops::upsample_bilinear_x2(state)});
        state = decoder_[level - 1].forward(in, mode);
        out.logits[level - 1] = heads_[level - 1].forward(state);
        if (trace) trace->decoder[level - 1] = state;
    }
    if (trace) trace->fused = fused;
    return out;
}

nn::ParameterList DctNet::parameters() {
    nn::ParameterList list;
    for (Modality m : {Modality::Rgb, Modality::Depth, Modality::Flow}) {
        auto& s = streams_[static_cast<std::size_t>(m)];
        if (s) s->collect(std::string(modality_name(m)), list);
    }
    for (std::size_t i = 0; i < mam_.size(); ++i) mam_[i].collect("mam" + std::to_string(kAttentionLevels[i]), list);
    for (std::size_t i = 0; i < self_nl_.size(); ++i)
        for (std::size_t k = 0; k < self_nl_[i].size(); ++k)
            self_nl_[i][k].collect("nonlocal" + std::to_string(kAttentionLevels[i]) + "." +
                                       std::string(modality_name(order_[k])),
                                   list);
    for (std::size_t i = 0; i < rfm_.size(); ++i) rfm_[i].collect("rfm" + std::to_string(i + 1), list);
    for (std::size_t i = 0; i < concat_.size(); ++i) concat_[i].collect("concat" + std::to_string(i + 1), list);
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
        decoder_[i].collect("decoder" + std::to_string(i + 1), nn::ParamGroup::Head, list);
        heads_[i].collect("head" + std::to_string(i + 1), nn::ParamGroup::Head, list);
    }
    return list;
}

}  // namespace dctnet::model
