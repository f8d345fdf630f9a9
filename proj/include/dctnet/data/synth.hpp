#pragma once

#include <array>
#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "dctnet/tensor.hpp"

namespace dctnet::data {

enum class Background { Flat, Textured, Cluttered, Moving };
enum class ObjectKind { Rectangle, Ellipse };

/// One foreground object. Position and size are in pixels; pixel (x, y) has
/// its center at integer coordinates. Motion per frame: the center moves by
/// (vx, vy) and the half extents scale by `scale_rate` about the center.
struct ObjectSpec {
    ObjectKind kind = ObjectKind::Rectangle;
    double cx = 0, cy = 0;
    double half_w = 8, half_h = 8;
    double vx = 0, vy = 0;
    double scale_rate = 1.0;
    std::array<double, 3> color{1.0, 1.0, 1.0};
    double depth = 0.8;  // larger = nearer
};

struct ClipSpec {
    std::uint64_t seed = 0;
    int frames = 8;
    int size = 64;
    int n_objects = 1;  // used when `objects` is empty
    Background background = Background::Textured;
    double contrast = 0.5;         // in (0, 1]
    double camera_velocity = 1.5;  // px/frame at the nearest background row (Moving only)
    bool static_objects = false;   // sampled objects get zero motion
    std::vector<ObjectSpec> objects;  // explicit objects; sampled from `seed` when empty
};

/// One frame: rgb [3,H,W] in [0,1], depth [1,H,W] in [0,1] (larger = nearer),
/// flow [2,H,W] forward displacement to the next frame in pixels, gt [1,H,W] in {0,1}.
struct TrimodalSample {
    Tensor rgb;
    Tensor depth;
    Tensor flow;
    Tensor gt;
};

struct Clip {
    std::string name;
    ClipSpec spec;
    std::vector<TrimodalSample> frames;
};

using Dataset = std::vector<Clip>;

/// Renders a clip. Identical specs give bit-identical samples. RGB and depth
/// are quantized to 8 bits and flow to 32-bit floats so a disk round-trip is
/// lossless. Throws SpecError if an object leaves the frame (1-pixel margin)
/// or a mask covers less than 2% or more than 60% of a frame.
std::vector<TrimodalSample> generate_clip(const ClipSpec& spec);

/// Objects used for rendering: spec.objects, or the ones sampled from the seed.
std::vector<ObjectSpec> resolve_objects(const ClipSpec& spec);

Clip make_clip(std::string name, const ClipSpec& spec);

/// Background depth at row y: a ramp from far (top) to near (bottom).
double background_depth(int y, int size);

inline constexpr double kMinCoverage = 0.02;
inline constexpr double kMaxCoverage = 0.60;

/// Middlebury-style color coding of a [2,H,W] flow field into [3,H,W] in
/// [0,1], normalized by the frame's largest displacement. Zero flow is white.
Tensor flow_to_color(const Tensor& flow);

std::string background_name(Background b);
Background parse_background(const std::string& name);

void to_json(nlohmann::json& j, const ObjectSpec& o);
void from_json(const nlohmann::json& j, ObjectSpec& o);
void to_json(nlohmann::json& j, const ClipSpec& s);
void from_json(const nlohmann::json& j, ClipSpec& s);

}  // namespace dctnet::data
