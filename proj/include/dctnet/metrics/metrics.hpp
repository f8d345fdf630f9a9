#pragma once

#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "dctnet/tensor.hpp"

namespace dctnet::metrics {

struct MetricsConfig {
    double beta_sq = 0.3;  // F-measure beta^2
    double alpha = 0.5;    // S-measure object/region balance
    int thresholds = 256;  // binarization levels k / thresholds, k = 0..thresholds-1

    /// Throws ConfigError unless beta_sq > 0, alpha in [0,1], thresholds >= 2.
    void validate() const;
};

void to_json(nlohmann::json& j, const MetricsConfig& c);
void from_json(const nlohmann::json& j, MetricsConfig& c);

// All metrics take a saliency map with values in [0,1] and a binary ground
// truth of identical shape. Maps are [H,W], or [1,H,W] / [1,1,H,W].

double mae(const Tensor& pred, const Tensor& gt);

struct FMeasureCurve {
    double max_f = 0.0;
    std::vector<double> precision;  // one entry per threshold
    std::vector<double> recall;
    std::vector<double> f;
};

/// Sweep of thresholds t_k = k / cfg.thresholds; a pixel is positive when
/// pred > t_k. Precision and recall define 0/0 as 0, as does F.
FMeasureCurve max_f_measure(const Tensor& pred, const Tensor& gt, const MetricsConfig& cfg = {});

/// Structure measure, alpha * object term + (1 - alpha) * region term,
/// clamped to [0,1]. An all-background ground truth scores 1 - mean(pred); an
/// all-foreground one scores the object similarity of pred.
double s_measure(const Tensor& pred, const Tensor& gt, const MetricsConfig& cfg = {});

struct FrameScores {
    double s_measure = 0.0;
    double max_f = 0.0;
    double mae = 0.0;
};

FrameScores score_frame(const Tensor& pred, const Tensor& gt, const MetricsConfig& cfg = {});

}  // namespace dctnet::metrics
