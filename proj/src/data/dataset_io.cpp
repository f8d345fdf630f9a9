#include "dctnet/data/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "dctnet/error.hpp"

namespace dctnet::data {

namespace {

std::vector<unsigned char> read_bytes(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::string& header, const std::vector<unsigned char>& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    os.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
    if (!os) throw DataError("failed writing " + path.string());
}

unsigned char to_byte(double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

// Minimal netpbm header scanner: magic, then whitespace/comment separated
// decimal fields, then exactly one whitespace byte before the raster.
class PnmHeader {
public:
    PnmHeader(const std::vector<unsigned char>& bytes, const fs::path& path) : b_(bytes), path_(path) {}

    void expect_magic(const char* magic) {
        if (b_.size() < 2 || b_[0] != magic[0] || b_[1] != magic[1]) fail(std::string("expected magic ") + magic, 0);
        pos_ = 2;
    }

    int next_int() {
        skip_space_and_comments();
        const std::size_t start = pos_;
        long v = 0;
        while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
            v = v * 10 + (b_[pos_] - '0');
            if (v > 1 << 20) fail("header value too large", start);
            ++pos_;
        }
        if (pos_ == start) fail("expected a decimal number", pos_);
        return static_cast<int>(v);
    }

    std::size_t raster_start() {
        if (pos_ >= b_.size() || !std::isspace(b_[pos_])) fail("expected whitespace before raster", pos_);
        return pos_ + 1;
    }

    [[noreturn]] void fail(const std::string& what, std::size_t offset) const {
        throw ParseError(path_.string() + ": " + what, offset);
    }

private:
    void skip_space_and_comments() {
        while (pos_ < b_.size()) {
            if (std::isspace(b_[pos_])) {
                ++pos_;
            } else if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<unsigned char>& b_;
    const fs::path& path_;
    std::size_t pos_ = 0;
};

Tensor read_pnm(const fs::path& path, const char* magic, int channels) {
    const auto bytes = read_bytes(path);
    PnmHeader h(bytes, path);
    h.expect_magic(magic);
    const int w = h.next_int();
    const int ht = h.next_int();
    const int maxval = h.next_int();
    if (w < 1 || ht < 1) h.fail("image extents must be positive", 2);
    if (maxval != 255) h.fail("only 8-bit images (maxval 255) are supported", 2);
    const std::size_t start = h.raster_start();
    const std::size_t plane = std::size_t(w) * ht;
    const std::size_t need = plane * channels;
    if (bytes.size() < start + need) {
        h.fail("truncated raster: expected " + std::to_string(need) + " bytes", bytes.size());
    }
    std::vector<double> data(need);
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < channels; ++c) data[c * plane + i] = bytes[start + i * channels + c] / 255.0;
    return Tensor::from_data({channels, ht, w}, std::move(data));
}

void write_pnm(const fs::path& path, const Tensor& t, const char* magic, int channels) {
    if (t.rank() != 3 || t.dim(0) != channels) {
        throw DimensionError(path.string() + ": expected [" + std::to_string(channels) + ",H,W], got " +
                             shape_str(t.shape()));
    }
    const int h = t.dim(1), w = t.dim(2);
    const std::size_t plane = std::size_t(w) * h;
    auto d = t.data();
    std::vector<unsigned char> body(plane * channels);
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < channels; ++c) body[i * channels + c] = to_byte(d[c * plane + i]);
    write_bytes(path, std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n", body);
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::vector<unsigned char>& b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[at + i]) << (8 * i);
    return v;
}

}  // namespace

void write_ppm(const fs::path& path, const Tensor& rgb) { write_pnm(path, rgb, "P6", 3); }
Tensor read_ppm(const fs::path& path) { return read_pnm(path, "P6", 3); }
void write_pgm(const fs::path& path, const Tensor& gray) { write_pnm(path, gray, "P5", 1); }
Tensor read_pgm(const fs::path& path) { return read_pnm(path, "P5", 1); }

void write_flo(const fs::path& path, const Tensor& flow) {
    if (flow.rank() != 3 || flow.dim(0) != 2) throw DimensionError("flow must be [2,H,W], got " + shape_str(flow.shape()));
    const int h = flow.dim(1), w = flow.dim(2);
    const std::size_t plane = std::size_t(w) * h;
    auto d = flow.data();
    std::vector<unsigned char> body;
    body.reserve(8 + plane * 8);
    put_u32(body, static_cast<std::uint32_t>(w));
    put_u32(body, static_cast<std::uint32_t>(h));
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 2; ++c) put_u32(body, std::bit_cast<std::uint32_t>(static_cast<float>(d[c * plane + i])));
    write_bytes(path, "PIEH", body);
}

Tensor read_flo(const fs::path& path) {
    const auto b = read_bytes(path);
    if (b.size() < 4 || std::memcmp(b.data(), "PIEH", 4) != 0) throw ParseError(path.string() + ": expected magic PIEH", 0);
    if (b.size() < 12) throw ParseError(path.string() + ": truncated flow header", b.size());
    const auto w = static_cast<std::int32_t>(get_u32(b, 4));
    const auto h = static_cast<std::int32_t>(get_u32(b, 8));
    if (w < 1 || h < 1 || w > (1 << 16) || h > (1 << 16)) throw ParseError(path.string() + ": invalid flow extents", 4);
    const std::size_t plane = std::size_t(w) * h;
    if (b.size() < 12 + plane * 8) {
        throw ParseError(path.string() + ": truncated flow data: expected " + std::to_string(plane * 8) + " bytes",
                         b.size());
    }
    std::vector<double> data(2 * plane);
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 2; ++c) data[c * plane + i] = std::bit_cast<float>(get_u32(b, 12 + (2 * i + c) * 4));
    return Tensor::from_data({2, h, w}, std::move(data));
}

std::string frame_name(int index, const char* extension) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d.%s", index, extension);
    return buf;
}

void write_dataset(const Dataset& clips, const fs::path& dir) {
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["clips"] = nlohmann::json::array();
    for (const Clip& clip : clips) {
        if (clip.name.empty() || clip.name.find('/') != std::string::npos) {
            throw DataError("clip name \"" + clip.name + "\" is not a valid directory name");
        }
        const fs::path root = dir / clip.name;
        for (const char* sub : {"rgb", "gt", "depth", "flow"}) fs::create_directories(root / sub);
        for (std::size_t t = 0; t < clip.frames.size(); ++t) {
            const auto& f = clip.frames[t];
            const int i = static_cast<int>(t);
            write_ppm(root / "rgb" / frame_name(i, "ppm"), f.rgb);
            write_pgm(root / "gt" / frame_name(i, "pgm"), f.gt);
            write_pgm(root / "depth" / frame_name(i, "pgm"), f.depth);
            write_flo(root / "flow" / frame_name(i, "flo"), f.flow);
        }
        manifest["clips"].push_back({{"name", clip.name}, {"frames", clip.frames.size()}, {"spec", clip.spec}});
    }
    std::ofstream os(dir / "manifest.json");
    if (!os) throw DataError("cannot write " + (dir / "manifest.json").string());
    os << manifest.dump(2) << '\n';
}

std::vector<ManifestEntry> read_manifest(const fs::path& dir) {
    const fs::path path = dir / "manifest.json";
    std::ifstream is(path);
    if (!is) throw DataError("no manifest.json in " + dir.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), e.byte);
    }
    std::vector<ManifestEntry> out;
    try {
        for (const auto& c : j.at("clips")) {
            ManifestEntry e;
            e.name = c.at("name").get<std::string>();
            e.frames = c.at("frames").get<int>();
            if (c.contains("spec")) e.spec = c.at("spec").get<ClipSpec>();
            out.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return out;
}

Dataset read_dataset(const fs::path& dir) {
    Dataset clips;
    for (const auto& entry : read_manifest(dir)) {
        Clip clip{entry.name, entry.spec, {}};
        const fs::path root = dir / entry.name;
        for (int i = 0; i < entry.frames; ++i) {
            TrimodalSample s;
            s.rgb = read_ppm(root / "rgb" / frame_name(i, "ppm"));
            s.gt = read_pgm(root / "gt" / frame_name(i, "pgm"));
            s.depth = read_pgm(root / "depth" / frame_name(i, "pgm"));
            s.flow = read_flo(root / "flow" / frame_name(i, "flo"));
            for (double v : s.gt.data())
                if (v != 0.0 && v != 1.0) throw DataError((root / "gt" / frame_name(i, "pgm")).string() + ": mask is not binary");
            clip.frames.push_back(std::move(s));
        }
        clips.push_back(std::move(clip));
    }
    return clips;
}

}  // namespace dctnet::data
