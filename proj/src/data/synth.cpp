#include "dctnet/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "dctnet/error.hpp"
#include "dctnet/json_util.hpp"
#include "dctnet/random.hpp"

namespace dctnet::data {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kWaves = 3;
constexpr int kDistractors = 6;

double quantize8(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

struct Wave {
    double fx, fy;
    std::array<double, 3> phase;
    double amp;
};

// Procedural texture shared by background and objects; objects sample it in
// their own moving coordinate frame.
struct Texture {
    std::array<Wave, kWaves> waves{};
    double amplitude = 0.0;

    double at(double u, double v, int ch) const {
        double s = 0.0;
        for (const auto& w : waves) s += w.amp * std::sin(w.fx * u + w.fy * v + w.phase[ch]);
        return amplitude * s;
    }
};

Texture sample_texture(Rng& rng, double amplitude) {
    Texture t;
    t.amplitude = amplitude;
    for (auto& w : t.waves) {
        const double freq = rng.uniform(0.25, 0.9);
        const double angle = rng.uniform(0.0, 2.0 * kPi);
        w.fx = freq * std::cos(angle);
        w.fy = freq * std::sin(angle);
        for (double& p : w.phase) p = rng.uniform(0.0, 2.0 * kPi);
        w.amp = rng.uniform(0.5, 1.0) / kWaves;
    }
    return t;
}

struct ObjectState {
    double cx, cy, hw, hh;
};

ObjectState state_at(const ObjectSpec& o, int t) {
    const double s = std::pow(o.scale_rate, t);
    return {o.cx + t * o.vx, o.cy + t * o.vy, o.half_w * s, o.half_h * s};
}

bool contains(ObjectKind kind, const ObjectState& s, double x, double y) {
    const double dx = (x - s.cx) / s.hw, dy = (y - s.cy) / s.hh;
    if (kind == ObjectKind::Rectangle) return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
    return dx * dx + dy * dy <= 1.0;
}

std::array<double, 3> sample_direction(Rng& rng) {
    std::array<double, 3> d{};
    double n = 0.0;
    while (n < 1e-6) {
        for (double& v : d) v = rng.normal();
        n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    }
    for (double& v : d) v /= n;
    return d;
}

struct Scene {
    std::array<double, 3> base;
    Texture texture;
    struct Distractor {
        ObjectKind kind;
        ObjectState state;
        std::array<double, 3> color;
    };
    std::vector<Distractor> distractors;
};

double texture_amplitude(Background b) { return b == Background::Flat ? 0.0 : 0.12; }

Scene sample_scene(const ClipSpec& spec, Rng& rng) {
    Scene sc;
    for (double& c : sc.base) c = rng.uniform(0.3, 0.7);
    sc.texture = sample_texture(rng, texture_amplitude(spec.background));
    if (spec.background == Background::Cluttered) {
        for (int i = 0; i < kDistractors; ++i) {
            Scene::Distractor d;
            d.kind = rng.uniform() < 0.5 ? ObjectKind::Rectangle : ObjectKind::Ellipse;
            d.state = {rng.uniform(0, spec.size - 1), rng.uniform(0, spec.size - 1), rng.uniform(2, spec.size * 0.12),
                       rng.uniform(2, spec.size * 0.12)};
            const auto dir = sample_direction(rng);
            for (int ch = 0; ch < 3; ++ch) d.color[ch] = std::clamp(sc.base[ch] + 0.25 * dir[ch], 0.0, 1.0);
            sc.distractors.push_back(d);
        }
    }
    return sc;
}

void validate_spec(const ClipSpec& spec) {
    if (spec.frames < 1) throw SpecError("clip needs at least one frame");
    if (spec.size < 8) throw SpecError("clip size must be at least 8 pixels");
    if (!(spec.contrast > 0.0 && spec.contrast <= 1.0)) throw SpecError("contrast must lie in (0, 1]");
    const int n = spec.objects.empty() ? spec.n_objects : static_cast<int>(spec.objects.size());
    if (n < 1 || n > 3) throw SpecError("a clip holds 1 to 3 objects, got " + std::to_string(n));
}

void check_inside(const std::vector<ObjectSpec>& objects, const ClipSpec& spec) {
    for (std::size_t k = 0; k < objects.size(); ++k) {
        const auto& o = objects[k];
        if (!(o.half_w > 0 && o.half_h > 0 && o.scale_rate > 0)) {
            throw SpecError("object " + std::to_string(k) + " needs positive extents and scale rate");
        }
        if (!(o.depth >= 0.0 && o.depth <= 1.0)) throw SpecError("object depth must lie in [0, 1]");
        for (int t = 0; t < spec.frames; ++t) {
            const ObjectState s = state_at(o, t);
            if (s.cx - s.hw < 1.0 || s.cx + s.hw > spec.size - 2.0 || s.cy - s.hh < 1.0 ||
                s.cy + s.hh > spec.size - 2.0) {
                throw SpecError("object " + std::to_string(k) + " leaves the frame (1 px margin) at frame " +
                                std::to_string(t));
            }
        }
    }
}

std::vector<ObjectSpec> sample_objects(const ClipSpec& spec, const Scene& scene, Rng& rng) {
    const int n = spec.n_objects;
    const double size = spec.size;
    const double travel = spec.frames - 1;
    std::vector<ObjectSpec> objects;
    for (int k = 0; k < n; ++k) {
        ObjectSpec o;
        o.kind = rng.uniform() < 0.5 ? ObjectKind::Rectangle : ObjectKind::Ellipse;
        o.half_w = rng.uniform(size * 0.09, size * 0.2);
        o.half_h = rng.uniform(size * 0.09, size * 0.2);
        if (!spec.static_objects) {
            o.vx = rng.uniform_int(-2, 2);
            o.vy = rng.uniform_int(-1, 1);
        }
        // Shrink the motion until the whole path fits.
        for (int tries = 0; tries < 3; ++tries) {
            const double lo_x = 1.0 + o.half_w + std::max(0.0, -o.vx * travel);
            const double hi_x = size - 2.0 - o.half_w - std::max(0.0, o.vx * travel);
            const double lo_y = 1.0 + o.half_h + std::max(0.0, -o.vy * travel);
            const double hi_y = size - 2.0 - o.half_h - std::max(0.0, o.vy * travel);
            if (lo_x <= hi_x && lo_y <= hi_y) {
                o.cx = std::round(rng.uniform(lo_x, hi_x));
                o.cy = std::round(rng.uniform(lo_y, hi_y));
                o.cx = std::clamp(o.cx, std::ceil(lo_x), std::floor(hi_x));
                o.cy = std::clamp(o.cy, std::ceil(lo_y), std::floor(hi_y));
                break;
            }
            o.vx = std::trunc(o.vx / 2);
            o.vy = std::trunc(o.vy / 2);
        }
        const auto dir = sample_direction(rng);
        for (int ch = 0; ch < 3; ++ch) o.color[ch] = std::clamp(scene.base[ch] + 0.6 * spec.contrast * dir[ch], 0.0, 1.0);
        o.depth = 0.62 + 0.3 * double(k + 1) / double(n);
        objects.push_back(o);
    }
    return objects;
}

double coverage(const std::vector<ObjectSpec>& objects, const ClipSpec& spec, int t) {
    int hits = 0;
    for (int y = 0; y < spec.size; ++y)
        for (int x = 0; x < spec.size; ++x)
            for (const auto& o : objects)
                if (contains(o.kind, state_at(o, t), x, y)) {
                    ++hits;
                    break;
                }
    return double(hits) / double(spec.size * spec.size);
}

void check_coverage(const std::vector<ObjectSpec>& objects, const ClipSpec& spec) {
    for (int t = 0; t < spec.frames; ++t) {
        const double c = coverage(objects, spec, t);
        if (c < kMinCoverage || c > kMaxCoverage) {
            throw SpecError("mask covers " + std::to_string(100.0 * c) + "% of frame " + std::to_string(t) +
                            ", outside [2%, 60%]");
        }
    }
}

struct Resolved {
    Scene scene;
    std::vector<ObjectSpec> objects;
};

Resolved resolve(const ClipSpec& spec) {
    validate_spec(spec);
    Rng rng(spec.seed);
    Resolved r{sample_scene(spec, rng), spec.objects};
    if (!r.objects.empty()) {
        check_inside(r.objects, spec);
        check_coverage(r.objects, spec);
        return r;
    }
    constexpr int kAttempts = 64;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        auto candidate = sample_objects(spec, r.scene, rng);
        try {
            check_inside(candidate, spec);
            check_coverage(candidate, spec);
        } catch (const SpecError&) {
            continue;
        }
        r.objects = std::move(candidate);
        return r;
    }
    throw SpecError("could not sample valid objects for seed " + std::to_string(spec.seed));
}

}  // namespace

double background_depth(int y, int size) { return 0.1 + 0.4 * double(y) / double(std::max(1, size - 1)); }

std::vector<ObjectSpec> resolve_objects(const ClipSpec& spec) { return resolve(spec).objects; }

std::vector<TrimodalSample> generate_clip(const ClipSpec& spec) {
    const Resolved r = resolve(spec);
    const int n = spec.size;
    const std::size_t plane = std::size_t(n) * n;
    // Nearest object first so the first hit is the visible one.
    std::vector<std::size_t> order(r.objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return r.objects[a].depth > r.objects[b].depth; });
    const double nearest_bg = background_depth(n - 1, n);

    std::vector<TrimodalSample> frames;
    for (int t = 0; t < spec.frames; ++t) {
        std::vector<double> rgb(3 * plane), depth(plane), flow(2 * plane), gt(plane, 0.0);
        std::vector<ObjectState> now, next;
        for (const auto& o : r.objects) {
            now.push_back(state_at(o, t));
            next.push_back(state_at(o, t + 1));
        }
        for (int y = 0; y < n; ++y) {
            const double bg_depth = background_depth(y, n);
            const double bg_dx = spec.background == Background::Moving ? spec.camera_velocity * bg_depth / nearest_bg : 0.0;
            for (int x = 0; x < n; ++x) {
                const std::size_t idx = std::size_t(y) * n + x;
                int hit = -1;
                for (std::size_t k : order) {
                    if (contains(r.objects[k].kind, now[k], x, y)) {
                        hit = static_cast<int>(k);
                        break;
                    }
                }
                std::array<double, 3> color{};
                if (hit >= 0) {
                    const auto& o = r.objects[hit];
                    const ObjectState& s = now[hit];
                    const double su = (x - s.cx) / std::pow(o.scale_rate, t);
                    const double sv = (y - s.cy) / std::pow(o.scale_rate, t);
                    for (int ch = 0; ch < 3; ++ch) color[ch] = o.color[ch] + r.scene.texture.at(su, sv, ch);
                    depth[idx] = o.depth;
                    gt[idx] = 1.0;
                    const ObjectState& s1 = next[hit];
                    const double nx = s1.cx + (x - s.cx) * o.scale_rate;
                    const double ny = s1.cy + (y - s.cy) * o.scale_rate;
                    flow[idx] = static_cast<float>(nx - x);
                    flow[plane + idx] = static_cast<float>(ny - y);
                } else {
                    const double u = x - t * bg_dx;
                    for (int ch = 0; ch < 3; ++ch) color[ch] = r.scene.base[ch] + r.scene.texture.at(u, y, ch);
                    for (const auto& d : r.scene.distractors) {
                        if (contains(d.kind, d.state, x, y)) {
                            for (int ch = 0; ch < 3; ++ch) color[ch] = d.color[ch] + r.scene.texture.at(u, y, ch);
                            break;
                        }
                    }
                    depth[idx] = bg_depth;
                    flow[idx] = static_cast<float>(bg_dx);
                    flow[plane + idx] = 0.0;
                }
                for (int ch = 0; ch < 3; ++ch) rgb[ch * plane + idx] = quantize8(color[ch]);
                depth[idx] = quantize8(depth[idx]);
            }
        }
        frames.push_back(TrimodalSample{Tensor::from_data({3, n, n}, std::move(rgb)),
                                        Tensor::from_data({1, n, n}, std::move(depth)),
                                        Tensor::from_data({2, n, n}, std::move(flow)),
                                        Tensor::from_data({1, n, n}, std::move(gt))});
    }
    return frames;
}

Clip make_clip(std::string name, const ClipSpec& spec) { return Clip{std::move(name), spec, generate_clip(spec)}; }

// ---------------------------------------------------------------------------

namespace {

struct ColorWheel {
    std::vector<std::array<double, 3>> colors;
    ColorWheel() {
        const int segments[6] = {15, 6, 4, 11, 13, 6};  // RY, YG, GC, CB, BM, MR
        for (int i = 0; i < segments[0]; ++i) colors.push_back({255, std::floor(255.0 * i / segments[0]), 0});
        for (int i = 0; i < segments[1]; ++i) colors.push_back({255 - std::floor(255.0 * i / segments[1]), 255, 0});
        for (int i = 0; i < segments[2]; ++i) colors.push_back({0, 255, std::floor(255.0 * i / segments[2])});
        for (int i = 0; i < segments[3]; ++i) colors.push_back({0, 255 - std::floor(255.0 * i / segments[3]), 255});
        for (int i = 0; i < segments[4]; ++i) colors.push_back({std::floor(255.0 * i / segments[4]), 0, 255});
        for (int i = 0; i < segments[5]; ++i) colors.push_back({255, 0, 255 - std::floor(255.0 * i / segments[5])});
    }
};

}  // namespace

Tensor flow_to_color(const Tensor& flow) {
    if (flow.rank() != 3 || flow.dim(0) != 2) throw DimensionError("flow_to_color expects [2,H,W], got " + shape_str(flow.shape()));
    static const ColorWheel wheel;
    const int h = flow.dim(1), w = flow.dim(2);
    const std::size_t plane = std::size_t(h) * w;
    auto f = flow.data();
    double max_rad = 0.0;
    for (std::size_t i = 0; i < plane; ++i) max_rad = std::max(max_rad, std::hypot(f[i], f[plane + i]));
    const double norm = max_rad > 1e-12 ? 1.0 / max_rad : 0.0;
    const int ncols = static_cast<int>(wheel.colors.size());
    std::vector<double> out(3 * plane);
    for (std::size_t i = 0; i < plane; ++i) {
        const double u = f[i] * norm, v = f[plane + i] * norm;
        const double rad = std::hypot(u, v);
        const double a = std::atan2(-v, -u) / kPi;
        const double fk = (a + 1.0) / 2.0 * (ncols - 1);
        const int k0 = static_cast<int>(std::floor(fk));
        const int k1 = (k0 + 1) % ncols;
        const double frac = fk - k0;
        for (int ch = 0; ch < 3; ++ch) {
            const double c0 = wheel.colors[k0][ch] / 255.0, c1 = wheel.colors[k1][ch] / 255.0;
            double col = (1.0 - frac) * c0 + frac * c1;
            col = rad <= 1.0 ? 1.0 - rad * (1.0 - col) : col * 0.75;
            out[ch * plane + i] = col;
        }
    }
    return Tensor::from_data({3, h, w}, std::move(out));
}

std::string background_name(Background b) {
    switch (b) {
        case Background::Flat: return "flat";
        case Background::Textured: return "textured";
        case Background::Cluttered: return "cluttered";
        case Background::Moving: return "moving";
    }
    return "?";
}

Background parse_background(const std::string& name) {
    for (Background b : {Background::Flat, Background::Textured, Background::Cluttered, Background::Moving})
        if (background_name(b) == name) return b;
    throw ConfigError("unknown background \"" + name + "\"");
}

void to_json(nlohmann::json& j, const ObjectSpec& o) {
    j = nlohmann::json{{"kind", o.kind == ObjectKind::Rectangle ? "rectangle" : "ellipse"},
                       {"cx", o.cx},
                       {"cy", o.cy},
                       {"half_w", o.half_w},
                       {"half_h", o.half_h},
                       {"vx", o.vx},
                       {"vy", o.vy},
                       {"scale_rate", o.scale_rate},
                       {"color", o.color},
                       {"depth", o.depth}};
}

void from_json(const nlohmann::json& j, ObjectSpec& o) {
    constexpr std::string_view ctx = "object";
    reject_unknown_keys(j, {"kind", "cx", "cy", "half_w", "half_h", "vx", "vy", "scale_rate", "color", "depth"}, ctx);
    std::string kind = o.kind == ObjectKind::Rectangle ? "rectangle" : "ellipse";
    read_field(j, "kind", kind, ctx);
    if (kind == "rectangle") {
        o.kind = ObjectKind::Rectangle;
    } else if (kind == "ellipse") {
        o.kind = ObjectKind::Ellipse;
    } else {
        throw ConfigError("object.kind must be \"rectangle\" or \"ellipse\"");
    }
    read_field(j, "cx", o.cx, ctx);
    read_field(j, "cy", o.cy, ctx);
    read_field(j, "half_w", o.half_w, ctx);
    read_field(j, "half_h", o.half_h, ctx);
    read_field(j, "vx", o.vx, ctx);
    read_field(j, "vy", o.vy, ctx);
    read_field(j, "scale_rate", o.scale_rate, ctx);
    read_field(j, "color", o.color, ctx);
    read_field(j, "depth", o.depth, ctx);
}

void to_json(nlohmann::json& j, const ClipSpec& s) {
    j = nlohmann::json{{"seed", s.seed},
                       {"frames", s.frames},
                       {"size", s.size},
                       {"n_objects", s.n_objects},
                       {"background", background_name(s.background)},
                       {"contrast", s.contrast},
                       {"camera_velocity", s.camera_velocity},
                       {"static_objects", s.static_objects},
                       {"objects", s.objects}};
}

void from_json(const nlohmann::json& j, ClipSpec& s) {
    constexpr std::string_view ctx = "clip";
    reject_unknown_keys(j,
                        {"seed", "frames", "size", "n_objects", "background", "contrast", "camera_velocity",
                         "static_objects", "objects"},
                        ctx);
    read_field(j, "seed", s.seed, ctx);
    read_field(j, "frames", s.frames, ctx);
    read_field(j, "size", s.size, ctx);
    read_field(j, "n_objects", s.n_objects, ctx);
    std::string bg = background_name(s.background);
    read_field(j, "background", bg, ctx);
    s.background = parse_background(bg);
    read_field(j, "contrast", s.contrast, ctx);
    read_field(j, "camera_velocity", s.camera_velocity, ctx);
    read_field(j, "static_objects", s.static_objects, ctx);
    read_field(j, "objects", s.objects, ctx);
}

}  // namespace dctnet::data
