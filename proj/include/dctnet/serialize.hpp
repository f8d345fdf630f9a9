#pragma once

#include <filesystem>
#include <iosfwd>

#include "dctnet/tensor.hpp"

namespace dctnet {

// On-disk tensor format: one JSON header line `{"shape":[...]}` followed by
// the elements as raw little-endian IEEE-754 doubles in row-major order.

void write_tensor(std::ostream& os, const Tensor& t);
/// Throws ParseError (with byte offset) on malformed or truncated input.
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace dctnet
