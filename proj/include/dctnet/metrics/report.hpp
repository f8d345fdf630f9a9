#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dctnet/metrics/metrics.hpp"

namespace dctnet::metrics {

/// Prediction and ground-truth maps of one sequence, frame aligned.
struct SequenceMaps {
    std::string name;
    std::vector<Tensor> preds;
    std::vector<Tensor> gts;
};

struct SequenceMetrics {
    std::string name;
    int frames = 0;
    double s_measure = 0.0;
    double max_f = 0.0;
    double mae = 0.0;
    std::vector<double> precision;  // per-threshold, averaged over frames
    std::vector<double> recall;
};

struct MetricsReport {
    MetricsConfig config;
    std::vector<SequenceMetrics> sequences;  // sorted by name
    double s_measure = 0.0;
    double max_f = 0.0;
    double mae = 0.0;
    std::vector<double> precision;
    std::vector<double> recall;

    /// Rows "sequence,s_measure,max_f,mae", then a final "mean" row.
    std::string csv() const;
    std::string json() const;
    /// Writes metrics.csv and metrics.json into `dir`.
    void write(const std::filesystem::path& dir) const;
};

/// Frame metrics are averaged within each sequence, then over sequences.
/// Sequences are processed in name order so the result does not depend on
/// the input order. Throws DataError on frame-count mismatches.
MetricsReport evaluate_sequences(const std::vector<SequenceMaps>& sequences, const MetricsConfig& cfg = {});

/// Reads 8-bit maps from <pred_dir>/<clip>/pred/NNNN.pgm and scores them
/// against the ground truth of the dataset in `data_dir`. Throws DataError
/// listing every missing prediction.
MetricsReport evaluate_prediction_dir(const std::filesystem::path& pred_dir, const std::filesystem::path& data_dir,
                                      const MetricsConfig& cfg = {});

}  // namespace dctnet::metrics
