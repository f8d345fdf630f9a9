#include <doctest.h>

#include <cmath>

#include "dctnet/error.hpp"
#include "dctnet/gradcheck.hpp"
#include "dctnet/model/network.hpp"
#include "dctnet/nn/encoder.hpp"
#include "helpers.hpp"

using namespace dctnet;
using testing::random_tensor;

TEST_SUITE("nn_blocks") {

TEST_CASE("bconv postconditions") {
    Rng rng(1);
    nn::BConv b(3, 5, 3, rng);
    const Tensor x = random_tensor({2, 3, 7, 6}, 2);
    const Tensor y = b.forward(x, nn::Mode::Train);
    CHECK(y.shape() == Shape{2, 5, 7, 6});
    for (double v : y.data()) CHECK(v >= 0.0);
    CHECK_THROWS_AS(b.forward(random_tensor({2, 4, 7, 6}, 3), nn::Mode::Train), DimensionError);

    nn::BConv dilated(3, 5, 3, rng, 1, 4);
    CHECK(dilated.forward(x, nn::Mode::Eval).shape() == Shape{2, 5, 7, 6});

    Tensor xo = x.clone();
    for (double& v : xo.data()) v = v < 0 ? v - 0.1 : v + 0.1;
    const Tensor r = random_tensor({2, 5, 7, 6}, 4);
    CHECK(grad_check([&](const Tensor& v) { return ops::sum(ops::mul(b.forward(v, nn::Mode::Eval), r)); }, xo) <= 1e-4);
}

TEST_CASE("channel attention") {
    Rng rng(5);
    nn::ChannelAttention ca(8, 4, rng);
    const Tensor x = random_tensor({2, 8, 3, 3}, 6, -2, 2);

    nn::ChannelAttention zeroed = ca;
    zeroed.excite.weight = Tensor::zeros(ca.excite.weight.shape());
    zeroed.excite.bias = Tensor::zeros(ca.excite.bias.shape());
    const Tensor half = zeroed.forward(x);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(half.data()[i] == x.data()[i] / 2);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Tensor xi = random_tensor({2, 8, 3, 3}, 100 + seed, -3, 3);
        const Tensor y = ca.forward(xi);
        for (std::size_t i = 0; i < xi.numel(); ++i) CHECK(std::abs(y.data()[i]) <= std::abs(xi.data()[i]));
        const Tensor w = ca.weights(xi);
        for (double s : w.data()) {
            CHECK(s > 0.0);
            CHECK(s < 1.0);
        }
    }
    CHECK_THROWS_AS(nn::ChannelAttention(6, 4, rng), ConfigError);

    const Tensor r = random_tensor({2, 8, 3, 3}, 7);
    CHECK(grad_check([&](const Tensor& v) { return ops::sum(ops::mul(ca.forward(v), r)); }, x) <= 1e-4);
}

TEST_CASE("channel attention is equivariant to channel permutation") {
    Rng rng(8);
    const int c = 8;
    nn::ChannelAttention ca(c, 4, rng);
    const std::vector<int> perm{3, 0, 7, 1, 6, 2, 5, 4};
    // y = P x with the input weights' columns and the output weights' rows permuted accordingly.
    nn::ChannelAttention permuted = ca;
    permuted.squeeze.weight = ca.squeeze.weight.clone();
    permuted.excite.weight = ca.excite.weight.clone();
    permuted.excite.bias = ca.excite.bias.clone();
    const int hidden = c / 4;
    for (int j = 0; j < hidden; ++j)
        for (int k = 0; k < c; ++k) permuted.squeeze.weight.data()[j * c + k] = ca.squeeze.weight.data()[j * c + perm[k]];
    for (int k = 0; k < c; ++k) {
        for (int j = 0; j < hidden; ++j) permuted.excite.weight.data()[k * hidden + j] = ca.excite.weight.data()[perm[k] * hidden + j];
        permuted.excite.bias.data()[k] = ca.excite.bias.data()[perm[k]];
    }
    const Tensor x = random_tensor({1, c, 2, 2}, 9);
    Tensor px = Tensor::zeros(x.shape());
    for (int k = 0; k < c; ++k)
        for (int i = 0; i < 4; ++i) px.data()[k * 4 + i] = x.data()[perm[k] * 4 + i];
    const Tensor s = ca.weights(x), ps = permuted.weights(px);
    for (int k = 0; k < c; ++k) CHECK(ps.data()[k] == doctest::Approx(s.data()[perm[k]]).epsilon(1e-14));

    // All-equal channels with symmetric weights give all-equal factors.
    nn::ChannelAttention sym = ca;
    sym.squeeze.weight = Tensor::full(ca.squeeze.weight.shape(), 0.3);
    sym.excite.weight = Tensor::full(ca.excite.weight.shape(), -0.2);
    sym.excite.bias = Tensor::full(ca.excite.bias.shape(), 0.1);
    const Tensor eq = sym.weights(Tensor::full({1, c, 2, 2}, 0.7));
    for (double v : eq.data()) CHECK(v == eq.data()[0]);
}

TEST_CASE("aspp keeps shape for any dilation set") {
    Rng rng(10);
    const Tensor x = random_tensor({2, 16, 4, 4}, 11);
    for (const std::vector<int>& rates : {std::vector<int>{1, 2, 4, 8}, std::vector<int>{1}, std::vector<int>{3, 5}}) {
        nn::Aspp a(16, 6, rates, rng);
        CHECK(a.forward(x, nn::Mode::Train).shape() == Shape{2, 6, 4, 4});
    }
    CHECK_THROWS_AS(nn::Aspp(16, 6, {}, rng), ConfigError);
}

TEST_CASE("encoder pyramid geometry") {
    Rng rng(12);
    nn::EncoderConfig cfg;
    nn::EncoderStream enc(cfg, rng);
    const Tensor img = random_tensor({2, 3, 64, 64}, 13, 0, 1);
    const nn::FeaturePyramid p = enc.forward(img, nn::Mode::Train);
    const int sizes[] = {32, 16, 8, 4, 2};
    for (int i = 1; i <= nn::kLevels; ++i) CHECK(p.level(i).shape() == Shape{2, cfg.cp_width, sizes[i - 1], sizes[i - 1]});
    const nn::FeaturePyramid raw = enc.backbone(img, nn::Mode::Train);
    const int widths[] = {16, 16, 32, 64, 128};
    for (int i = 1; i <= nn::kLevels; ++i) CHECK(raw.level(i).dim(1) == widths[i - 1]);

    CHECK_THROWS_AS(enc.forward(random_tensor({1, 3, 48, 64}, 14), nn::Mode::Train), ConfigError);
    try {
        enc.forward(random_tensor({1, 3, 40, 40}, 14), nn::Mode::Train);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("32") != std::string::npos);
    }
}

TEST_CASE("encoder parameters receive finite gradients") {
    Rng rng(15);
    nn::EncoderConfig cfg;
    cfg.width = 4;
    cfg.cp_width = 4;
    nn::EncoderStream enc(cfg, rng);
    nn::ParameterList params;
    enc.collect("rgb", params);
    Tape tape;
    {
        TapeScope scope(tape);
        const nn::FeaturePyramid p = enc.forward(random_tensor({2, 3, 32, 32}, 16, 0, 1), nn::Mode::Train);
        Tensor loss = Tensor::scalar(0.0);
        for (int i = 1; i <= nn::kLevels; ++i)
            loss = ops::add(loss, ops::sum(ops::mul(p.level(i), random_tensor(p.level(i).shape(), 20 + i))));
        tape.backward(loss);
    }
    for (const auto& p : params.params) {
        bool finite = true, nonzero = false;
        for (double g : p.tensor.grad()) {
            finite = finite && std::isfinite(g);
            nonzero = nonzero || g != 0.0;
        }
        CHECK_MESSAGE(finite, p.name);
        CHECK_MESSAGE(nonzero, p.name);
    }
    const bool has_backbone = std::any_of(params.params.begin(), params.params.end(),
                                          [](const nn::ParamRef& p) { return p.group == nn::ParamGroup::Backbone; });
    CHECK(has_backbone);
}

TEST_CASE("modality streams do not share parameters") {
    model::ModelConfig cfg;
    cfg.input_size = 32;
    model::DctNet net(cfg);
    const Tensor img = random_tensor({2, 3, 32, 32}, 17, 0, 1);
    auto run = [&](model::Modality m) { return net.stream(m).forward(img, nn::Mode::Eval); };
    const nn::FeaturePyramid depth_before = run(model::Modality::Depth), flow_before = run(model::Modality::Flow);
    const nn::FeaturePyramid rgb_before = run(model::Modality::Rgb);
    for (double& v : net.stream(model::Modality::Rgb).stem.conv.weight.data()) v *= 1.5;
    const nn::FeaturePyramid depth_after = run(model::Modality::Depth), flow_after = run(model::Modality::Flow);
    const nn::FeaturePyramid rgb_after = run(model::Modality::Rgb);
    for (int i = 1; i <= nn::kLevels; ++i) {
        CHECK(testing::bit_equal(depth_before.level(i), depth_after.level(i)));
        CHECK(testing::bit_equal(flow_before.level(i), flow_after.level(i)));
    }
    CHECK_FALSE(testing::bit_equal(rgb_before.level(1), rgb_after.level(1)));
}

}  // TEST_SUITE
