#include "dctnet/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>

#include "dctnet/error.hpp"

namespace dctnet {

namespace {

std::uint64_t to_little(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
        return r;
    }
    return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
    nlohmann::json header;
    header["shape"] = t.shape();
    os << header.dump() << '\n';
    for (double v : t.data()) {
        const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
        char buf[8];
        std::memcpy(buf, &bits, 8);
        os.write(buf, 8);
    }
    if (!os) throw DataError("failed to write tensor");
}

Tensor read_tensor(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("missing tensor header line", 0);
    Shape shape;
    try {
        auto header = nlohmann::json::parse(line);
        if (!header.is_object() || !header.contains("shape") || header.size() != 1) {
            throw ParseError("tensor header must be {\"shape\":[...]}", 0);
        }
        shape = header.at("shape").get<Shape>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad tensor header: ") + e.what(), 0);
    }
    for (int e : shape)
        if (e < 0) throw ParseError("negative extent in tensor header", 0);
    const std::size_t n = shape_numel(shape);
    const std::size_t data_offset = line.size() + 1;
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        char buf[8];
        is.read(buf, 8);
        if (is.gcount() != 8) {
            throw ParseError("truncated tensor data: expected " + std::to_string(n) + " doubles, got " +
                                 std::to_string(i),
                             data_offset + i * 8 + static_cast<std::size_t>(is.gcount()));
        }
        std::uint64_t bits;
        std::memcpy(&bits, buf, 8);
        data[i] = std::bit_cast<double>(to_little(bits));
    }
    return Tensor::from_data(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    write_tensor(os, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    try {
        return read_tensor(is);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.message(), e.offset());
    }
}

}  // namespace dctnet
