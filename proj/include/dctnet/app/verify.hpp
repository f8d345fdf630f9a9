#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dctnet::app {

/// One finite-difference comparison of a verification suite.
struct CheckResult {
    std::string scope;  // "ops", "blocks" or "model"
    std::string name;
    double error = 0.0;  // max relative error over coordinates
    double tolerance = 0.0;
    double seconds = 0.0;

    bool passed() const { return error <= tolerance; }
};

inline constexpr double kOpTolerance = 1e-5;
inline constexpr double kBlockTolerance = 1e-4;
inline constexpr double kGradStep = 1e-5;

/// Runs the central-difference suite for `scope` ("ops", "blocks", "model"
/// or "all") on seeded inputs kept away from relu kinks. Throws ConfigError
/// on an unknown scope.
std::vector<CheckResult> run_gradcheck_suite(std::string_view scope);

/// Fixed-width table, one line per check, with a trailing summary line.
std::string format_check_table(const std::vector<CheckResult>& results);

}  // namespace dctnet::app
