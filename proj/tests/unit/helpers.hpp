#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "dctnet/random.hpp"
#include "dctnet/tensor.hpp"

namespace testing {

inline dctnet::Tensor random_tensor(dctnet::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    dctnet::Rng rng(seed);
    std::vector<double> v(dctnet::shape_numel(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return dctnet::Tensor::from_data(std::move(shape), std::move(v));
}

inline std::vector<double> values(const dctnet::Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline bool bit_equal(const dctnet::Tensor& a, const dctnet::Tensor& b) {
    return a.shape() == b.shape() && values(a) == values(b);
}

/// Fresh directory under the build tree's temp area, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() / ("dctnet_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
