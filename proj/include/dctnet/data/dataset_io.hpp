#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dctnet/data/synth.hpp"

namespace dctnet::data {

namespace fs = std::filesystem;

// Netpbm and Middlebury .flo codecs. Readers throw ParseError with the byte
// offset of the first malformed or missing byte.

/// [3,H,W] in [0,1] -> binary P6, 8 bits per channel.
void write_ppm(const fs::path& path, const Tensor& rgb);
Tensor read_ppm(const fs::path& path);

/// [1,H,W] in [0,1] -> binary P5, values round(255 v).
void write_pgm(const fs::path& path, const Tensor& gray);
Tensor read_pgm(const fs::path& path);

/// [2,H,W] -> "PIEH", int32 width, int32 height, interleaved float32 (u,v).
void write_flo(const fs::path& path, const Tensor& flow);
Tensor read_flo(const fs::path& path);

/// Frame file name, e.g. frame_name(3, "ppm") == "0003.ppm".
std::string frame_name(int index, const char* extension);

/// Writes every clip under dir/<name>/{rgb,gt,depth,flow} plus dir/manifest.json.
void write_dataset(const Dataset& clips, const fs::path& dir);

/// Reads a directory written by write_dataset; clips come back in manifest order.
Dataset read_dataset(const fs::path& dir);

struct ManifestEntry {
    std::string name;
    int frames = 0;
    ClipSpec spec;
};

/// The clip list of dir/manifest.json without loading any frames.
std::vector<ManifestEntry> read_manifest(const fs::path& dir);

}  // namespace dctnet::data
