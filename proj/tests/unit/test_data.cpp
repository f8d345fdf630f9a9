#include <doctest.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "dctnet/data/dataset_io.hpp"
#include "dctnet/error.hpp"
#include "helpers.hpp"
#include "oracles/loss_oracles.hpp"

using namespace dctnet;
using namespace dctnet::data;
using testing::bit_equal;
using testing::values;

namespace {

ObjectSpec rectangle(double cx, double cy, double hw, double hh, double vx = 0, double vy = 0) {
    ObjectSpec o;
    o.kind = ObjectKind::Rectangle;
    o.cx = cx;
    o.cy = cy;
    o.half_w = hw;
    o.half_h = hh;
    o.vx = vx;
    o.vy = vy;
    o.color = {0.9, 0.2, 0.1};
    return o;
}

ClipSpec explicit_spec(std::vector<ObjectSpec> objects, Background bg = Background::Flat) {
    ClipSpec s;
    s.size = 32;
    s.frames = 4;
    s.background = bg;
    s.objects = std::move(objects);
    return s;
}

double at(const Tensor& t, int c, int y, int x) { return t.data()[(static_cast<std::size_t>(c) * t.dim(1) + y) * t.dim(2) + x]; }

std::size_t bytes_of(const std::filesystem::path& p) { return std::filesystem::file_size(p); }

void truncate_file(const std::filesystem::path& p, std::size_t n) { std::filesystem::resize_file(p, n); }

}  // namespace

TEST_SUITE("data_synth") {

TEST_CASE("static rectangle has zero flow and a fixed mask") {
    const auto frames = generate_clip(explicit_spec({rectangle(15, 15, 5, 4)}));
    REQUIRE(frames.size() == 4);
    for (const auto& f : frames) {
        CHECK(f.rgb.shape() == Shape{3, 32, 32});
        CHECK(f.depth.shape() == Shape{1, 32, 32});
        CHECK(f.flow.shape() == Shape{2, 32, 32});
        CHECK(f.gt.shape() == Shape{1, 32, 32});
        for (double v : f.flow.data()) REQUIRE(v == 0.0);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                const bool inside = std::abs(x - 15) <= 5 && std::abs(y - 15) <= 4;
                REQUIRE(at(f.gt, 0, y, x) == (inside ? 1.0 : 0.0));
            }
        CHECK(bit_equal(f.gt, frames[0].gt));
    }
}

TEST_CASE("translating object has the analytic flow") {
    const auto frames = generate_clip(explicit_spec({rectangle(8, 15, 4, 4, 2, 0)}, Background::Textured));
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
        const auto& f = frames[t];
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                if (at(f.gt, 0, y, x) == 1.0) {
                    REQUIRE(at(f.flow, 0, y, x) == 2.0);
                    REQUIRE(at(f.flow, 1, y, x) == 0.0);
                } else {
                    REQUIRE(at(f.flow, 0, y, x) == 0.0);
                    REQUIRE(at(f.flow, 1, y, x) == 0.0);
                }
            }
        // Mask shifts by two pixels.
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x + 2 < 32; ++x) REQUIRE(at(frames[t + 1].gt, 0, y, x + 2) == at(f.gt, 0, y, x));
    }
}

TEST_CASE("warping along the flow reproduces the next frame on flat backgrounds") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ClipSpec s;
        s.seed = seed;
        s.size = 32;
        s.frames = 5;
        s.n_objects = 1 + static_cast<int>(seed % 3);
        s.background = Background::Flat;
        const auto frames = generate_clip(s);
        for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
            const auto warped = oracle::forward_warp(values(frames[t].rgb), values(frames[t].flow), 3, 32, 32);
            const auto next = values(frames[t + 1].rgb);
            double err = 0;
            for (std::size_t i = 0; i < next.size(); ++i) err += std::abs(warped[i] - next[i]);
            CHECK(err / next.size() <= 0.02);
        }
    }
}

TEST_CASE("generation is deterministic and in range") {
    ClipSpec s;
    s.seed = 12;
    s.size = 32;
    s.n_objects = 3;
    s.background = Background::Cluttered;
    const auto a = generate_clip(s), b = generate_clip(s);
    for (std::size_t t = 0; t < a.size(); ++t) {
        CHECK(bit_equal(a[t].rgb, b[t].rgb));
        CHECK(bit_equal(a[t].depth, b[t].depth));
        CHECK(bit_equal(a[t].flow, b[t].flow));
        CHECK(bit_equal(a[t].gt, b[t].gt));
        for (double v : a[t].rgb.data()) REQUIRE((v >= 0.0 && v <= 1.0));
        for (double v : a[t].depth.data()) REQUIRE((v >= 0.0 && v <= 1.0));
        double fg = 0;
        for (double v : a[t].gt.data()) {
            REQUIRE((v == 0.0 || v == 1.0));
            fg += v;
        }
        CHECK(fg / (32 * 32) >= kMinCoverage);
        CHECK(fg / (32 * 32) <= kMaxCoverage);
    }
    s.seed = 13;
    CHECK_FALSE(bit_equal(generate_clip(s)[0].rgb, a[0].rgb));
}

TEST_CASE("objects sit on depth plateaus nearer than the background") {
    const auto frames = generate_clip(explicit_spec({rectangle(15, 15, 5, 5)}));
    const auto& f = frames[0];
    const double object_depth = at(f.depth, 0, 15, 15);
    for (int y = 10; y <= 20; ++y)
        for (int x = 10; x <= 20; ++x) CHECK(at(f.depth, 0, y, x) == object_depth);
    for (int y = 0; y < 32; ++y) CHECK(at(f.depth, 0, y, 0) < object_depth);
    CHECK(at(f.depth, 0, 0, 0) < at(f.depth, 0, 31, 0));
}

TEST_CASE("moving background shows parallax") {
    ClipSpec s = explicit_spec({rectangle(15, 15, 4, 4)}, Background::Moving);
    s.camera_velocity = 2.0;
    const auto frames = generate_clip(s);
    const auto& f = frames[0];
    double prev = -1;
    for (int y = 0; y < 32; ++y) {
        if (y >= 11 && y <= 19) continue;
        const double u = at(f.flow, 0, y, 0);
        CHECK(at(f.flow, 1, y, 0) == 0.0);
        CHECK(u > prev);  // nearer rows move faster
        prev = u;
    }
    CHECK(at(f.flow, 0, 31, 0) == doctest::Approx(2.0));
    CHECK(at(f.flow, 0, 15, 15) == 0.0);  // the static object
}

TEST_CASE("invalid specs are rejected") {
    CHECK_THROWS_AS(generate_clip(explicit_spec({rectangle(28, 15, 4, 4, 2, 0)})), SpecError);  // leaves the frame
    CHECK_THROWS_AS(generate_clip(explicit_spec({rectangle(15, 15, 1, 1)})), SpecError);        // too small
    CHECK_THROWS_AS(generate_clip(explicit_spec({rectangle(15, 15, 14, 14)})), SpecError);      // too large
    ClipSpec s;
    s.contrast = 0.0;
    CHECK_THROWS_AS(generate_clip(s), SpecError);
    s = {};
    s.n_objects = 4;
    CHECK_THROWS_AS(generate_clip(s), SpecError);
    s = {};
    s.frames = 0;
    CHECK_THROWS_AS(generate_clip(s), SpecError);
}

TEST_CASE("flow color coding") {
    Tensor flow = Tensor::zeros({2, 4, 4});
    const Tensor white = flow_to_color(flow);
    CHECK(white.shape() == Shape{3, 4, 4});
    for (double v : white.data()) CHECK(v == doctest::Approx(1.0));
    flow.data()[0] = 3.0;
    flow.data()[16 + 5] = -1.0;
    const Tensor c = flow_to_color(flow);
    for (double v : c.data()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(at(c, 0, 0, 0) + at(c, 1, 0, 0) + at(c, 2, 0, 0) < 3.0 - 1e-6);
    CHECK(at(c, 0, 3, 3) == doctest::Approx(1.0));
}

TEST_CASE("spec json round trip") {
    ClipSpec s = explicit_spec({rectangle(15, 15, 5, 4, 1, -1)}, Background::Moving);
    s.objects[0].kind = ObjectKind::Ellipse;
    nlohmann::json j = s;
    const ClipSpec back = j.get<ClipSpec>();
    CHECK(nlohmann::json(back) == j);
    CHECK(j["background"] == "moving");
    j["bogus"] = 1;
    CHECK_THROWS(j.get<ClipSpec>());
}

TEST_CASE("dataset round trip is lossless") {
    Dataset ds;
    for (int i = 0; i < 3; ++i) {
        ClipSpec s;
        s.seed = 20 + i;
        s.size = 32;
        s.frames = 3;
        s.background = static_cast<Background>(i + 1);
        ds.push_back(make_clip("seq_" + std::string(1, static_cast<char>('c' - i)), s));
    }
    testing::TempDir dir("dataset");
    write_dataset(ds, dir.path());
    const auto manifest = read_manifest(dir.path());
    REQUIRE(manifest.size() == 3);
    CHECK(manifest[0].name == "seq_c");
    CHECK(manifest[2].name == "seq_a");
    CHECK(manifest[1].frames == 3);
    const Dataset back = read_dataset(dir.path());
    REQUIRE(back.size() == 3);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(back[c].name == ds[c].name);
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(bit_equal(back[c].frames[t].rgb, ds[c].frames[t].rgb));
            CHECK(bit_equal(back[c].frames[t].depth, ds[c].frames[t].depth));
            CHECK(bit_equal(back[c].frames[t].flow, ds[c].frames[t].flow));
            CHECK(bit_equal(back[c].frames[t].gt, ds[c].frames[t].gt));
        }
    }
    CHECK(std::filesystem::exists(dir.path() / "seq_b" / "flow" / "0002.flo"));
    CHECK(bytes_of(dir.path() / "seq_b" / "flow" / "0002.flo") == 12 + 32 * 32 * 8);
    std::ifstream flo(dir.path() / "seq_b" / "flow" / "0000.flo", std::ios::binary);
    char magic[4];
    flo.read(magic, 4);
    CHECK(std::string(magic, 4) == "PIEH");
}

TEST_CASE("truncated and malformed files raise parse errors") {
    testing::TempDir dir("codec");
    const auto frames = generate_clip(explicit_spec({rectangle(15, 15, 5, 4, 1, 0)}));
    const auto ppm = dir.path() / "a.ppm", pgm = dir.path() / "a.pgm", flo = dir.path() / "a.flo";
    write_ppm(ppm, frames[0].rgb);
    write_pgm(pgm, frames[0].depth);
    write_flo(flo, frames[0].flow);
    CHECK(bit_equal(read_ppm(ppm), frames[0].rgb));

    truncate_file(ppm, bytes_of(ppm) - 7);
    try {
        read_ppm(ppm);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == bytes_of(ppm));
    }
    truncate_file(flo, 10);
    CHECK_THROWS_AS(read_flo(flo), ParseError);
    {
        std::ofstream out(pgm, std::ios::binary | std::ios::trunc);
        out << "P2\n4 4\n255\n";
    }
    try {
        read_pgm(pgm);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 0);
    }
    CHECK_THROWS_AS(read_ppm(dir.path() / "missing.ppm"), DataError);
}

}  // TEST_SUITE
