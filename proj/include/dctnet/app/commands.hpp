#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dctnet/app/run_config.hpp"
#include "dctnet/metrics/report.hpp"

namespace dctnet::app {

namespace fs = std::filesystem;

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitVerification = 4;

void gen_data(const RunConfig& config, const fs::path& out, std::ostream& log);
void train(const RunConfig& config, const fs::path& data, const fs::path& out, std::ostream& log);
/// Exactly one of `checkpoint` and `pred_dir` must be non-empty.
metrics::MetricsReport eval(const RunConfig& config, const fs::path& checkpoint, const fs::path& pred_dir,
                            const fs::path& data, const fs::path& out, std::ostream& log);
void predict(const fs::path& checkpoint, const fs::path& data, const fs::path& out, std::ostream& log);
/// Returns kExitVerification if any check exceeds its tolerance.
int gradcheck(const std::string& scope, std::ostream& log);

struct AblationRow {
    std::string variant;  // table identifier: A1, B1, ..., Ours
    double max_f = 0.0;
    double s_measure = 0.0;
    double mae = 0.0;
};

struct AblationSplit {
    std::string name;
    std::vector<AblationRow> rows;  // table order

    /// "variant,max_f,s_measure,mae" header plus one row per variant.
    std::string csv() const;
    const AblationRow& row(const std::string& variant) const;
};

/// Trains every variant on `train_set` with the same config and seed and
/// scores each one on every split. When `out` is non-empty, writes
/// <out>/<variant>/loss_log.csv and <out>/ablation_<split>.csv.
std::vector<AblationSplit> run_ablation(const model::ModelConfig& base, const data::Dataset& train_set,
                                        const std::vector<std::pair<std::string, data::Dataset>>& splits,
                                        const metrics::MetricsConfig& metrics_cfg, const fs::path& out,
                                        std::ostream& log);

void ablate(const RunConfig& config, const fs::path& data, const std::vector<std::string>& eval_data,
            const fs::path& out, std::ostream& log);

/// Maps an exception thrown by a command to its exit code and one-line
/// message "error[<kind>]: <what>".
std::pair<int, std::string> describe_failure(const std::exception& e);

}  // namespace dctnet::app
