#include "dctnet/fusion/attention.hpp"

#include <algorithm>

#include "dctnet/error.hpp"

namespace dctnet::fusion {

namespace {
Tensor flatten_spatial(const Tensor& x) { return ops::reshape(x, {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)}); }

nn::Conv2d pointwise(int in, int out, Rng& rng) { return nn::Conv2d(in, out, 1, rng, true); }
}  // namespace

Tensor spatial_affinity(const Tensor& theta, const Tensor& phi) {
    if (theta.shape() != phi.shape()) {
        throw DimensionError("spatial_affinity: " + shape_str(theta.shape()) + " vs " + shape_str(phi.shape()));
    }
    Tensor queries = ops::transpose_last2(flatten_spatial(theta));  // [B,HW,E]
    Tensor keys = flatten_spatial(phi);                             // [B,E,HW]
    return ops::softmax_rows(ops::matmul(queries, keys));
}

Tensor attend(const Tensor& affinity, const Tensor& value) {
    const Shape shape = value.shape();
    Tensor v = ops::transpose_last2(flatten_spatial(value));  // [B,HW,C]
    Tensor mixed = ops::matmul(affinity, v);                   // [B,HW,C]
    return ops::reshape(ops::transpose_last2(mixed), shape);
}

void require_same_shapes(const Tensor& main, std::span<const Tensor> aux, const char* where) {
    if (main.rank() != 4) throw DimensionError(std::string(where) + ": expected [B,C,H,W], got " + shape_str(main.shape()));
    for (const auto& a : aux) {
        if (a.shape() != main.shape()) {
            throw DimensionError(std::string(where) + ": modality shapes differ, " + shape_str(main.shape()) + " vs " +
                                 shape_str(a.shape()));
        }
    }
}

CrossModalBranch::CrossModalBranch(int channels, Rng& rng)
    : hybrid(2 * channels, channels, 3, rng),
      theta(pointwise(channels, std::max(1, channels / 2), rng)),
      phi(pointwise(channels, std::max(1, channels / 2), rng)),
      value_main(pointwise(channels, channels, rng)),
      value_aux(pointwise(channels, channels, rng)),
      out_main(pointwise(channels, channels, rng)),
      out_aux(pointwise(channels, channels, rng)) {}

void CrossModalBranch::collect(const std::string& prefix, nn::ParameterList& out) {
    using nn::join_name;
    constexpr auto g = nn::ParamGroup::Head;
    hybrid.collect(join_name(prefix, "hybrid"), g, out);
    theta.collect(join_name(prefix, "theta"), g, out);
    phi.collect(join_name(prefix, "phi"), g, out);
    value_main.collect(join_name(prefix, "value_main"), g, out);
    value_aux.collect(join_name(prefix, "value_aux"), g, out);
    out_main.collect(join_name(prefix, "out_main"), g, out);
    out_aux.collect(join_name(prefix, "out_aux"), g, out);
}

MultiModalAttention::MultiModalAttention(int channels, int aux_count, Rng& rng) {
    if (aux_count < 1) throw ConfigError("multi-modal attention needs at least one auxiliary modality");
    for (int i = 0; i < aux_count; ++i) branches.emplace_back(channels, rng);
    aggregate = nn::BConv(aux_count * channels, channels, 3, rng);
}

MamOutput MultiModalAttention::forward(const Tensor& main, std::span<const Tensor> aux, Mode mode) {
    require_same_shapes(main, aux, "multi-modal attention");
    if (aux.size() != branches.size()) {
        throw ConfigError("multi-modal attention built for " + std::to_string(branches.size()) +
                          " auxiliary modalities, got " + std::to_string(aux.size()));
    }
    MamOutput out;
    std::vector<Tensor> assisted;
    for (std::size_t i = 0; i < branches.size(); ++i) {
        CrossModalBranch& b = branches[i];
        Tensor hybrid = b.hybrid.forward(ops::concat_channels({main, aux[i]}), mode);
        Tensor a = spatial_affinity(b.theta.forward(hybrid), b.phi.forward(hybrid));
        Tensor attended_main = b.out_main.forward(attend(a, b.value_main.forward(main)));
        Tensor attended_aux = b.out_aux.forward(attend(a, b.value_aux.forward(aux[i])));
        out.aux.push_back(ops::add(aux[i], attended_aux));
        assisted.push_back(ops::add(main, attended_main));
        out.affinity.push_back(a);
    }
    out.main = aggregate.forward(ops::concat_channels(assisted), mode);
    return out;
}

void MultiModalAttention::collect(const std::string& prefix, nn::ParameterList& out) {
    for (std::size_t i = 0; i < branches.size(); ++i)
        branches[i].collect(nn::join_name(prefix, "branch" + std::to_string(i)), out);
    aggregate.collect(nn::join_name(prefix, "aggregate"), nn::ParamGroup::Head, out);
}

SelfNonLocal::SelfNonLocal(int channels, Rng& rng)
    : theta(pointwise(channels, std::max(1, channels / 2), rng)),
      phi(pointwise(channels, std::max(1, channels / 2), rng)),
      value(pointwise(channels, channels, rng)),
      out(pointwise(channels, channels, rng)) {}

Tensor SelfNonLocal::forward(const Tensor& x) const {
    Tensor a = spatial_affinity(theta.forward(x), phi.forward(x));
    return ops::add(x, out.forward(attend(a, value.forward(x))));
}

void SelfNonLocal::collect(const std::string& prefix, nn::ParameterList& list) const {
    using nn::join_name;
    constexpr auto g = nn::ParamGroup::Head;
    theta.collect(join_name(prefix, "theta"), g, list);
    phi.collect(join_name(prefix, "phi"), g, list);
    value.collect(join_name(prefix, "value"), g, list);
    out.collect(join_name(prefix, "out"), g, list);
}

}  // namespace dctnet::fusion
