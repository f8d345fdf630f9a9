#include "dctnet/app/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "dctnet/error.hpp"
#include "dctnet/fusion/attention.hpp"
#include "dctnet/fusion/refinement.hpp"
#include "dctnet/gradcheck.hpp"
#include "dctnet/model/loss.hpp"
#include "dctnet/model/network.hpp"
#include "dctnet/nn/encoder.hpp"

namespace dctnet::app {

namespace {

using ops::Mode;

// Values with magnitude in [0.1, 1] and random sign: far from relu kinks at
// the perturbation scale.
Tensor away_from_zero(Shape shape, Rng& rng) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
    return Tensor::from_data(std::move(shape), std::move(v));
}

Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(v));
}

// sum(y * R) for a fixed random R, so every output coordinate matters with
// a distinct weight.
Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
    Rng rng(seed);
    return ops::sum(ops::mul(y, uniform(y.shape(), -1.0, 1.0, rng)));
}

class Suite {
public:
    Suite(std::string scope, double tolerance, std::vector<CheckResult>& out)
        : scope_(std::move(scope)), tolerance_(tolerance), out_(out) {}

    void check(std::string name, const ScalarFn& f, const Tensor& x) {
        const auto t0 = std::chrono::steady_clock::now();
        const double err = grad_check(f, x, kGradStep);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out_.push_back({scope_, std::move(name), err, tolerance_, secs});
    }

    // Checks y = op(x) through a weighted sum of its output.
    void check_map(std::string name, const std::function<Tensor(const Tensor&)>& op, const Tensor& x) {
        const std::uint64_t seed = 1000 + out_.size();
        check(std::move(name), [op, seed](const Tensor& v) { return weighted_sum(op(v), seed); }, x);
    }

private:
    std::string scope_;
    double tolerance_;
    std::vector<CheckResult>& out_;
};

void ops_suite(std::vector<CheckResult>& out) {
    Suite s("ops", kOpTolerance, out);
    Rng rng(11);
    const Shape fm{2, 3, 4, 4};
    const Tensor x = away_from_zero(fm, rng);
    const Tensor other = away_from_zero(fm, rng);

    s.check_map("add", [&](const Tensor& v) { return ops::add(v, other); }, x);
    s.check_map("sub", [&](const Tensor& v) { return ops::sub(other, v); }, x);
    s.check_map("mul", [&](const Tensor& v) { return ops::mul(v, ops::mul(v, other)); }, x);
    s.check_map("scale", [](const Tensor& v) { return ops::scale(v, -1.7); }, x);
    s.check_map("relu", [](const Tensor& v) { return ops::relu(v); }, x);
    s.check_map("sigmoid", [](const Tensor& v) { return ops::sigmoid(ops::scale(v, 3.0)); }, x);
    s.check("mean", [](const Tensor& v) { return ops::mean(ops::mul(v, v)); }, x);

    const Tensor a = away_from_zero({5, 7}, rng), b = away_from_zero({7, 3}, rng);
    s.check_map("matmul.a", [&](const Tensor& v) { return ops::matmul(v, b); }, a);
    s.check_map("matmul.b", [&](const Tensor& v) { return ops::matmul(a, v); }, b);
    const Tensor ba = away_from_zero({2, 4, 5}, rng), bb = away_from_zero({2, 5, 3}, rng);
    s.check_map("matmul.batched", [&](const Tensor& v) { return ops::matmul(v, ops::transpose_last2(ops::transpose_last2(bb))); }, ba);
    s.check_map("transpose_last2", [](const Tensor& v) { return ops::transpose_last2(v); }, ba);
    s.check_map("reshape", [](const Tensor& v) { return ops::reshape(v, {6, 16}); }, x);

    const Tensor cx = away_from_zero({2, 3, 8, 8}, rng);
    const Tensor cw = away_from_zero({4, 3, 3, 3}, rng);
    const Tensor cb = away_from_zero({4}, rng);
    const ops::Conv2dParams dil{1, 2, 2};
    s.check_map("conv2d.x", [&](const Tensor& v) { return ops::conv2d(v, cw, cb, dil); }, cx);
    s.check_map("conv2d.weight", [&](const Tensor& v) { return ops::conv2d(cx, v, cb, dil); }, cw);
    s.check_map("conv2d.bias", [&](const Tensor& v) { return ops::conv2d(cx, cw, v, dil); }, cb);
    s.check_map("conv2d.stride2", [&](const Tensor& v) { return ops::conv2d(v, cw, cb, {2, 1, 1}); }, cx);

    const Tensor gamma = uniform({3}, 0.5, 1.5, rng), beta = away_from_zero({3}, rng);
    auto bn = [&](Mode mode) {
        return [&, mode](const Tensor& v) {
            ops::RunningStats stats(3);
            return ops::batchnorm2d(v, gamma, beta, stats, mode);
        };
    };
    s.check_map("batchnorm2d.train", bn(Mode::Train), x);
    s.check_map("batchnorm2d.eval", bn(Mode::Eval), x);
    s.check_map("batchnorm2d.gamma", [&](const Tensor& v) {
        ops::RunningStats stats(3);
        return ops::batchnorm2d(x, v, beta, stats, Mode::Train);
    }, gamma);

    s.check_map("softmax_rows", [](const Tensor& v) { return ops::softmax_rows(v); }, away_from_zero({6, 6}, rng));
    s.check_map("concat_channels", [&](const Tensor& v) { return ops::concat_channels({other, v, v}); }, x);
    s.check_map("global_avg_pool", [](const Tensor& v) { return ops::global_avg_pool(v); }, x);
    const Tensor sc = uniform({2, 3}, 0.1, 0.9, rng);
    s.check_map("scale_channels.x", [&](const Tensor& v) { return ops::scale_channels(v, sc); }, x);
    s.check_map("scale_channels.s", [&](const Tensor& v) { return ops::scale_channels(x, v); }, sc);
    s.check_map("expand_spatial", [](const Tensor& v) { return ops::expand_spatial(v, 3, 2); }, sc);
    const Tensor lw = away_from_zero({4, 3}, rng), lb = away_from_zero({4}, rng);
    s.check_map("linear.x", [&](const Tensor& v) { return ops::linear(v, lw, lb); }, sc);
    s.check_map("linear.weight", [&](const Tensor& v) { return ops::linear(sc, v, lb); }, lw);
    s.check_map("upsample_bilinear_x2", [](const Tensor& v) { return ops::upsample_bilinear_x2(v); }, x);
    s.check_map("resize_bilinear", [](const Tensor& v) { return ops::resize_bilinear(v, 7, 5); }, x);
    s.check_map("max_pool2d", [](const Tensor& v) { return ops::max_pool2d(v, 2, 2); }, x);

    const Tensor p = uniform({2, 1, 4, 4}, 0.05, 0.95, rng);
    Tensor g = uniform({2, 1, 4, 4}, 0.0, 1.0, rng);
    for (double& v : g.data()) v = v < 0.4 ? 1.0 : 0.0;
    s.check("bce_mean", [&](const Tensor& v) { return ops::bce_mean(v, g); }, p);
    s.check("iou_loss", [&](const Tensor& v) { return ops::iou_loss(v, g, 1.0); }, p);
}

void blocks_suite(std::vector<CheckResult>& out) {
    Suite s("blocks", kBlockTolerance, out);
    Rng rng(23);

    nn::BConv bconv(3, 4, 3, rng);
    const Tensor x = away_from_zero({2, 3, 5, 5}, rng);
    s.check_map("bconv.eval", [&](const Tensor& v) { return bconv.forward(v, Mode::Eval); }, x);
    s.check_map("bconv.train", [&](const Tensor& v) { return bconv.forward(v, Mode::Train); }, x);
    s.check_map("bconv.weight", [&](const Tensor&) { return bconv.forward(x, Mode::Train); }, bconv.conv.weight);

    nn::ChannelAttention ca(8, 4, rng);
    const Tensor cx = away_from_zero({2, 8, 3, 3}, rng);
    s.check_map("channel_attention.x", [&](const Tensor& v) { return ca.forward(v); }, cx);
    s.check_map("channel_attention.w1", [&](const Tensor&) { return ca.forward(cx); }, ca.squeeze.weight);

    nn::Aspp aspp(4, 4, {1, 2, 4, 8}, rng);
    const Tensor ax = away_from_zero({2, 4, 2, 2}, rng);
    s.check_map("aspp", [&](const Tensor& v) { return aspp.forward(v, Mode::Train); }, ax);

    nn::BasicBlock block(3, 6, 2, rng);
    s.check_map("basic_block", [&](const Tensor& v) { return block.forward(v, Mode::Train); }, x);

    const int c = 4;
    const Tensor xr = away_from_zero({1, c, 3, 3}, rng);
    const Tensor xd = away_from_zero({1, c, 3, 3}, rng);
    const Tensor xf = away_from_zero({1, c, 3, 3}, rng);
    fusion::MultiModalAttention mam(c, 2, rng);
    auto mam_sum = [&](const Tensor& r, const Tensor& d, const Tensor& f) {
        const std::array<Tensor, 2> aux{d, f};
        fusion::MamOutput o = mam.forward(r, aux, Mode::Train);
        return ops::add(weighted_sum(o.main, 7), ops::add(weighted_sum(o.aux[0], 8), weighted_sum(o.aux[1], 9)));
    };
    s.check("mam.main", [&](const Tensor& v) { return mam_sum(v, xd, xf); }, xr);
    s.check("mam.depth", [&](const Tensor& v) { return mam_sum(xr, v, xf); }, xd);
    s.check("mam.flow", [&](const Tensor& v) { return mam_sum(xr, xd, v); }, xf);
    s.check("mam.theta", [&](const Tensor&) { return mam_sum(xr, xd, xf); }, mam.branches[0].theta.weight);
    s.check("mam.value_aux", [&](const Tensor&) { return mam_sum(xr, xd, xf); }, mam.branches[1].value_aux.weight);

    fusion::SelfNonLocal nl(c, rng);
    s.check_map("self_nonlocal", [&](const Tensor& v) { return nl.forward(v); }, xr);

    auto rfm_check = [&](const char* name, fusion::RfmVariant variant, int aux) {
        auto rfm = std::make_shared<fusion::RefinementFusion>(c, 2, variant, rng);
        auto run = [rfm, aux, xd, xf](const Tensor& r, const Tensor& d) {
            std::vector<Tensor> a{d};
            if (aux == 2) a.push_back(xf);
            return rfm->forward(r, a, Mode::Train);
        };
        s.check_map(std::string(name) + ".main", [run, xd](const Tensor& v) { return run(v, xd); }, xr);
        s.check_map(std::string(name) + ".aux", [run, xr](const Tensor& v) { return run(xr, v); }, xd);
        s.check_map(std::string(name) + ".excite", [run, xr, xd](const Tensor&) { return run(xr, xd); },
                    rfm->attention_main.excite.bias);
    };
    rfm_check("rfm.full", fusion::RfmVariant::Full, 2);
    rfm_check("rfm.no_depth", fusion::RfmVariant::NoDepth, 1);
    rfm_check("rfm.flat_concat", fusion::RfmVariant::FlatConcat, 2);

    fusion::ConcatFusion concat(c, 2, rng);
    s.check_map("concat_fusion", [&](const Tensor& v) {
        const std::array<Tensor, 2> aux{xd, xf};
        return concat.forward(v, aux, Mode::Train);
    }, xr);

    Tensor gt = Tensor::zeros({2, 1, 8, 8});
    for (int b = 0; b < 2; ++b)
        for (int y = 2; y < 6; ++y)
            for (int xx = 1; xx < 5 + b; ++xx) gt.data()[b * 64 + y * 8 + xx] = 1.0;
    s.check("level_loss", [&](const Tensor& v) { return model::level_loss(v, gt); }, away_from_zero({2, 1, 4, 4}, rng));
}

void model_suite(std::vector<CheckResult>& out) {
    Suite s("model", kBlockTolerance, out);
    model::ModelConfig cfg;
    cfg.input_size = 32;
    cfg.encoder_width = 4;
    cfg.cp_width = 4;
    cfg.ca_ratio = 2;
    cfg.seed = 5;
    auto net = std::make_shared<model::DctNet>(cfg);
    Rng rng(31);
    const Tensor rgb = uniform({2, 3, 32, 32}, 0.0, 1.0, rng);
    const Tensor depth = uniform({2, 1, 32, 32}, 0.0, 1.0, rng);
    const Tensor flow = uniform({2, 3, 32, 32}, 0.0, 1.0, rng);
    Tensor gt = Tensor::zeros({2, 1, 32, 32});
    for (int b = 0; b < 2; ++b)
        for (int y = 8; y < 24; ++y)
            for (int x = 6 + 2 * b; x < 20 + 2 * b; ++x) gt.data()[b * 1024 + y * 32 + x] = 1.0;
    auto loss = [net, rgb, depth, flow, gt](const Tensor&) {
        return model::loss_total(net->forward(rgb, depth, flow, Mode::Train), gt).total;
    };
    nn::ParameterList params = net->parameters();
    for (const char* name : {"head1.weight", "head5.bias", "decoder3.bn.gamma", "rfm2.ca_main.excite.weight",
                             "rfm4.final_fuse.bn.beta", "mam3.branch0.theta.weight", "mam5.branch1.out_aux.weight",
                             "mam4.aggregate.bn.gamma", "rgb.cp1.bn.gamma", "depth.aspp.pool.bias",
                             "flow.stem.bn.beta"}) {
        const nn::ParamRef* found = nullptr;
        for (const auto& p : params.params)
            if (p.name == name) found = &p;
        if (!found) throw VerificationError(std::string("model suite: no parameter named ") + name);
        s.check(std::string("loss_total/") + name, loss, found->tensor);
    }
    s.check("loss_total/depth_input", [net, rgb, flow, gt](const Tensor& d) {
        return model::loss_total(net->forward(rgb, d, flow, Mode::Train), gt).total;
    }, depth);
}

}  // namespace

std::vector<CheckResult> run_gradcheck_suite(std::string_view scope) {
    std::vector<CheckResult> out;
    const bool all = scope == "all";
    if (!all && scope != "ops" && scope != "blocks" && scope != "model") {
        throw ConfigError("unknown gradcheck scope \"" + std::string(scope) + "\" (expected ops, blocks, model or all)");
    }
    if (all || scope == "ops") ops_suite(out);
    if (all || scope == "blocks") blocks_suite(out);
    if (all || scope == "model") model_suite(out);
    return out;
}

std::string format_check_table(const std::vector<CheckResult>& results) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-7s %-44s %12s %9s %8s  %s\n", "scope", "check", "max_rel_err", "tol", "time_s",
                  "status");
    out += line;
    int failed = 0;
    for (const auto& r : results) {
        failed += r.passed() ? 0 : 1;
        std::snprintf(line, sizeof line, "%-7s %-44s %12.3e %9.1e %8.3f  %s\n", r.scope.c_str(), r.name.c_str(), r.error,
                      r.tolerance, r.seconds, r.passed() ? "ok" : "FAIL");
        out += line;
    }
    std::snprintf(line, sizeof line, "%zu checks, %d failed\n", results.size(), failed);
    out += line;
    return out;
}

}  // namespace dctnet::app
