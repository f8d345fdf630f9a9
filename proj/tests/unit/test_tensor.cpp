#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dctnet/error.hpp"
#include "dctnet/gradcheck.hpp"
#include "dctnet/ops.hpp"
#include "dctnet/serialize.hpp"
#include "helpers.hpp"

using namespace dctnet;
using testing::random_tensor;
using testing::values;

TEST_SUITE("tensor_core") {

TEST_CASE("tensor invariants") {
    Tensor t = Tensor::zeros({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.data().size() == shape_numel(t.shape()));
    CHECK_THROWS_AS(t.grad(), ContractError);
    t.set_requires_grad(true);
    CHECK(t.grad().size() == t.numel());
    CHECK(t.dim(-1) == 4);
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), DimensionError);
}

TEST_CASE("matmul examples") {
    const Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    const Tensor b = Tensor::from_data({2, 2}, {3, 4, 5, 6});
    CHECK(values(ops::matmul(eye, b)) == std::vector<double>{3, 4, 5, 6});
    const Tensor r = ops::matmul(Tensor::from_data({1, 2}, {1, 2}), Tensor::from_data({2, 1}, {3, 4}));
    CHECK(r.shape() == Shape{1, 1});
    CHECK(r.item() == 11.0);

    try {
        ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
    }

    const Tensor a = random_tensor({5, 7}, 1), c = random_tensor({7, 3}, 2);
    CHECK(grad_check([&](const Tensor& x) { return ops::sum(ops::mul(ops::matmul(x, c), random_tensor({5, 3}, 3))); }, a) <= 1e-6);
    CHECK(grad_check([&](const Tensor& x) { return ops::sum(ops::mul(ops::matmul(a, x), random_tensor({5, 3}, 3))); }, c) <= 1e-6);
}

TEST_CASE("conv2d examples") {
    // 1x1 identity kernel over 3 channels.
    Tensor w = Tensor::zeros({3, 3, 1, 1});
    for (int i = 0; i < 3; ++i) w.data()[i * 3 + i] = 1.0;
    const Tensor x = random_tensor({2, 3, 5, 5}, 4);
    CHECK(testing::bit_equal(ops::conv2d(x, w, Tensor(), {}), x));

    const Tensor box = ops::conv2d(Tensor::full({1, 1, 3, 3}, 1.0), Tensor::full({1, 1, 3, 3}, 1.0), Tensor(), {});
    CHECK(box.shape() == Shape{1, 1, 1, 1});
    CHECK(box.item() == 9.0);

    CHECK_THROWS_AS(ops::conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 5, 5}), Tensor(), {}), DimensionError);
    CHECK(ops::conv_out_extent(8, 3, {2, 1, 1}) == 4);
    CHECK(ops::conv_out_extent(8, 3, {1, 2, 2}) == 8);

    const Tensor cx = random_tensor({2, 3, 8, 8}, 5), cw = random_tensor({4, 3, 3, 3}, 6), cb = random_tensor({4}, 7);
    const Tensor r = random_tensor({2, 4, 8, 8}, 8);
    const ops::Conv2dParams p{1, 2, 2};
    CHECK(grad_check([&](const Tensor& v) { return ops::sum(ops::mul(ops::conv2d(v, cw, cb, p), r)); }, cx) <= 1e-6);
    CHECK(grad_check([&](const Tensor& v) { return ops::sum(ops::mul(ops::conv2d(cx, v, cb, p), r)); }, cw) <= 1e-6);
    CHECK(grad_check([&](const Tensor& v) { return ops::sum(ops::mul(ops::conv2d(cx, cw, v, p), r)); }, cb) <= 1e-6);
}

TEST_CASE("batchnorm2d examples") {
    ops::RunningStats stats(2);
    const Tensor gamma = Tensor::full({2}, 1.0), beta = Tensor::zeros({2});
    const Tensor y = ops::batchnorm2d(Tensor::full({2, 2, 3, 3}, 4.0), gamma, beta, stats, ops::Mode::Train);
    for (double v : y.data()) CHECK(v == 0.0);

    // Standardize per channel first, then apply gamma = 2, beta = 1.
    Tensor x = random_tensor({4, 2, 3, 3}, 9);
    ops::RunningStats s0(2);
    Tensor z = ops::batchnorm2d(x, gamma, beta, s0, ops::Mode::Train, 0.0);
    ops::RunningStats s1(2);
    Tensor out = ops::batchnorm2d(z, Tensor::full({2}, 2.0), Tensor::full({2}, 1.0), s1, ops::Mode::Train);
    for (int c = 0; c < 2; ++c) {
        double sum = 0, sq = 0;
        int n = 0;
        for (int b = 0; b < 4; ++b)
            for (int i = 0; i < 9; ++i) {
                const double v = out.data()[(b * 2 + c) * 9 + i];
                sum += v;
                sq += v * v;
                ++n;
            }
        const double m = sum / n;
        CHECK(m == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::sqrt(sq / n - m * m) == doctest::Approx(2.0).epsilon(1e-4));
    }

    // Running stats follow momentum 0.1 with unbiased variance.
    CHECK(s0.mean[0] != 0.0);
    CHECK_THROWS_AS(ops::batchnorm2d(Tensor::zeros({1, 2, 1, 1}), gamma, beta, stats, ops::Mode::Train), ContractError);
    CHECK_NOTHROW(ops::batchnorm2d(Tensor::zeros({1, 2, 1, 1}), gamma, beta, stats, ops::Mode::Eval));

    const Tensor r = random_tensor({4, 2, 3, 3}, 10);
    CHECK(grad_check([&](const Tensor& v) {
              ops::RunningStats st(2);
              return ops::sum(ops::mul(ops::batchnorm2d(v, Tensor::full({2}, 1.5), Tensor::full({2}, 0.2), st, ops::Mode::Train), r));
          }, x) <= 1e-5);
}

TEST_CASE("softmax_rows examples and properties") {
    const Tensor u = ops::softmax_rows(Tensor::zeros({1, 3}));
    for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const Tensor big = ops::softmax_rows(Tensor::from_data({1, 2}, {1000, 1000}));
    CHECK(big.data()[0] == 0.5);
    CHECK(big.data()[1] == 0.5);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Tensor s = ops::softmax_rows(random_tensor({6, 9}, seed, -30, 30));
        for (int r = 0; r < 6; ++r) {
            double sum = 0;
            for (int k = 0; k < 9; ++k) {
                const double v = s.data()[r * 9 + k];
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }
    const Tensor x = random_tensor({6, 6}, 11);
    const Tensor r = random_tensor({6, 6}, 12);
    CHECK(grad_check([&](const Tensor& v) { return ops::sum(ops::mul(ops::softmax_rows(v), r)); }, x) <= 1e-6);
}

TEST_CASE("elementwise identities and resampling") {
    const Tensor x = random_tensor({2, 3, 4, 4}, 13);
    CHECK(testing::bit_equal(ops::mul(x, Tensor::full(x.shape(), 1.0)), x));
    CHECK(testing::bit_equal(ops::add(x, Tensor::zeros(x.shape())), x));
    CHECK_THROWS_AS(ops::add(x, Tensor::zeros({2, 3, 4, 5})), DimensionError);
    CHECK_THROWS_AS(ops::concat_channels({x, Tensor::zeros({2, 3, 4, 5})}), DimensionError);

    const Tensor up = ops::upsample_bilinear_x2(Tensor::full({1, 2, 3, 5}, 0.7));
    CHECK(up.shape() == Shape{1, 2, 6, 10});
    for (double v : up.data()) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));

    CHECK(ops::relu(Tensor::from_data({3}, {-1, 0, 2})).data()[1] == 0.0);
    const Tensor g = ops::global_avg_pool(x);
    CHECK(g.shape() == Shape{2, 3});
    CHECK(ops::max_pool2d(x, 2, 2).shape() == Shape{2, 3, 2, 2});
    CHECK(ops::concat_channels({x, x}).shape() == Shape{2, 6, 4, 4});
}

TEST_CASE("relu subgradient at zero is zero") {
    Tensor x = Tensor::from_data({3}, {-1.0, 0.0, 1.0}, true);
    Tape tape;
    {
        TapeScope scope(tape);
        tape.backward(ops::sum(ops::relu(x)));
    }
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[2] == 1.0);
}

TEST_CASE("backward contract") {
    Tensor x = random_tensor({3}, 14);
    x.set_requires_grad(true);
    Tape tape;
    TapeScope scope(tape);
    const Tensor y = ops::mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), ContractError);  // non-scalar
    const Tensor loss = ops::sum(y);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), ContractError);  // second traversal
    tape.reset();
    CHECK(tape.size() == 0);
    const Tensor foreign = Tensor::scalar(1.0, true);
    CHECK_THROWS_AS(tape.backward(foreign), ContractError);
}

TEST_CASE("gradient accumulation over two consumers") {
    Tensor x = random_tensor({2, 3}, 15);
    x.set_requires_grad(true);
    Tape tape;
    {
        TapeScope scope(tape);
        tape.backward(ops::add(ops::sum(x), ops::sum(x)));
    }
    for (double g : x.grad()) CHECK(g == 2.0);
}

TEST_CASE("no recording without a tape or under NoGradScope") {
    Tensor x = random_tensor({2, 2}, 16);
    x.set_requires_grad(true);
    CHECK(ops::mul(x, x).node_id() == -1);
    Tape tape;
    TapeScope scope(tape);
    {
        NoGradScope none;
        CHECK(ops::mul(x, x).node_id() == -1);
    }
    CHECK(ops::mul(x, x).node_id() == 0);
    CHECK(tape.count("mul") == 1);
}

TEST_CASE("grad_check on a quadratic") {
    const Tensor x = random_tensor({4, 5}, 17, -3, 3);
    CHECK(grad_check([](const Tensor& v) { return ops::sum(ops::mul(v, v)); }, x) <= 1e-8);
}

TEST_CASE("gradient suite over every op on 2x3x4x4") {
    const Tensor x = random_tensor({2, 3, 4, 4}, 18);
    const Tensor r = random_tensor({2, 3, 4, 4}, 19);
    const Tensor up_r = random_tensor({2, 3, 8, 8}, 20);
    const Tensor cat_r = random_tensor({2, 6, 4, 4}, 21);
    const Tensor pool_r = random_tensor({2, 3, 2, 2}, 22);
    const Tensor gap_r = random_tensor({2, 3}, 23);
    const Tensor other = random_tensor({2, 3, 4, 4}, 24, 0.2, 1.0);
    // Keep relu inputs away from zero.
    Tensor xr = x.clone();
    for (double& v : xr.data()) v = v < 0 ? v - 0.1 : v + 0.1;

    auto w = [](const Tensor& y, const Tensor& rr) { return ops::sum(ops::mul(y, rr)); };
    CHECK(grad_check([&](const Tensor& v) { return w(ops::add(v, other), r); }, x) <= 1e-5);
    CHECK(grad_check([&](const Tensor& v) { return w(ops::mul(v, other), r); }, x) <= 1e-5);
    CHECK(grad_check([&](const Tensor& v) { return w(ops::relu(v), r); }, xr) <= 1e-5);
    CHECK(grad_check([&](const Tensor& v) { return w(ops::sigmoid(v), r); }, x) <= 1e-5);
    CHECK(grad_check([&](const Tensor& v) { return w(ops::concat_channels({v, other}), cat_r); }, x) <= 1e-5);
    CHECK(grad_check([&](const Tensor& v) { return w(ops::global_avg_pool(v), gap_r); }, x) <= 1e-5);
    CHECK(grad_check([&](const Tensor& v) { return w(ops::upsample_bilinear_x2(v), up_r); }, x) <= 1e-5);
    CHECK(grad_check([&](const Tensor& v) { return w(ops::max_pool2d(v, 2, 2), pool_r); }, x) <= 1e-5);
}

TEST_CASE("output shape is a pure function of input shapes") {
    Rng rng(25);
    for (int trial = 0; trial < 25; ++trial) {
        const int b = 1 + static_cast<int>(rng.below(3)), c = 1 + static_cast<int>(rng.below(4));
        const int h = 2 + static_cast<int>(rng.below(7)), wd = 2 + static_cast<int>(rng.below(7));
        const int o = 1 + static_cast<int>(rng.below(4)), k = 1 + 2 * static_cast<int>(rng.below(2));
        const int stride = 1 + static_cast<int>(rng.below(2)), dil = 1 + static_cast<int>(rng.below(2));
        const ops::Conv2dParams p{stride, dil, dil * (k - 1) / 2};
        const Tensor x1 = random_tensor({b, c, h, wd}, 100 + trial), x2 = random_tensor({b, c, h, wd}, 200 + trial);
        const Tensor ww = random_tensor({o, c, k, k}, 300 + trial);
        const Tensor y1 = ops::conv2d(x1, ww, Tensor(), p), y2 = ops::conv2d(x2, ww, Tensor(), p);
        CHECK(y1.shape() == y2.shape());
        CHECK(y1.shape() == Shape{b, o, ops::conv_out_extent(h, k, p), ops::conv_out_extent(wd, k, p)});
        CHECK(ops::upsample_bilinear_x2(x1).shape() == Shape{b, c, 2 * h, 2 * wd});
        CHECK(ops::global_avg_pool(x1).shape() == Shape{b, c});
        CHECK(ops::softmax_rows(x1).shape() == x1.shape());
    }
}

TEST_CASE("determinism of forward ops") {
    const Tensor x = random_tensor({2, 3, 8, 8}, 26), w = random_tensor({4, 3, 3, 3}, 27);
    const Tensor a = ops::conv2d(x, w, Tensor(), {1, 1, 1});
    const Tensor b = ops::conv2d(x, w, Tensor(), {1, 1, 1});
    CHECK(testing::bit_equal(a, b));
}

TEST_CASE("tensor serialization") {
    const Tensor t = random_tensor({2, 3, 4}, 28);
    std::stringstream ss;
    write_tensor(ss, t);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, bytes.find('\n')) == "{\"shape\":[2,3,4]}");
    std::stringstream in(bytes);
    CHECK(testing::bit_equal(read_tensor(in), t));

    std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
    try {
        read_tensor(truncated);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == bytes.size() - 5);
    }
    std::stringstream bad("{\"shape\":\"x\"}\n");
    CHECK_THROWS_AS(read_tensor(bad), ParseError);
}

}  // TEST_SUITE
