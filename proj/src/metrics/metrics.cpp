#include "dctnet/metrics/metrics.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <nlohmann/json.hpp>

#include "dctnet/error.hpp"
#include "dctnet/json_util.hpp"

namespace dctnet::metrics {

void MetricsConfig::validate() const {
    if (!(beta_sq > 0.0)) throw ConfigError("metrics.beta_sq must be > 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("metrics.alpha must lie in [0,1]");
    if (thresholds < 2) throw ConfigError("metrics.thresholds must be >= 2");
}

void to_json(nlohmann::json& j, const MetricsConfig& c) {
    j = nlohmann::json{{"beta_sq", c.beta_sq}, {"alpha", c.alpha}, {"thresholds", c.thresholds}};
}

void from_json(const nlohmann::json& j, MetricsConfig& c) {
    reject_unknown_keys(j, {"beta_sq", "alpha", "thresholds"}, "metrics");
    read_field(j, "beta_sq", c.beta_sq, "metrics");
    read_field(j, "alpha", c.alpha, "metrics");
    read_field(j, "thresholds", c.thresholds, "metrics");
    c.validate();
}

namespace {

struct Map2d {
    int h, w;
};

Map2d map_extent(const Tensor& pred, const Tensor& gt, const char* where) {
    if (pred.shape() != gt.shape()) {
        throw DimensionError(std::string(where) + ": prediction " + shape_str(pred.shape()) + " vs ground truth " +
                             shape_str(gt.shape()));
    }
    const int r = pred.rank();
    if (r < 2) throw DimensionError(std::string(where) + ": expected a 2-D map, got " + shape_str(pred.shape()));
    for (int a = 0; a < r - 2; ++a)
        if (pred.dim(a) != 1) throw DimensionError(std::string(where) + ": expected a single map, got " + shape_str(pred.shape()));
    return {pred.dim(-2), pred.dim(-1)};
}

// Largest k with k / T < p, or -1 when p <= 0.
int last_positive_threshold(double p, int T) {
    int k = static_cast<int>(std::ceil(p * T)) - 1;
    k = std::clamp(k, -1, T - 1);
    while (k + 1 <= T - 1 && static_cast<double>(k + 1) / T < p) ++k;
    while (k >= 0 && !(static_cast<double>(k) / T < p)) --k;
    return k;
}

constexpr double kEps = DBL_EPSILON;

// 2 m / (m^2 + 1 + 2 sigma + eps) from running sums over n values.
double object_similarity(double sum, double sum_sq, double n) {
    if (n <= 0) return 0.0;
    const double m = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq - n * m * m) / (n - 1)) : 0.0;
    return 2.0 * m / (m * m + 1.0 + 2.0 * std::sqrt(var) + kEps);
}

struct Moments {
    double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
};

double region_ssim(const Moments& q) {
    if (q.n <= 0) return 0.0;
    const double x = q.sx / q.n, y = q.sy / q.n;
    const double denom = q.n - 1 + kEps;
    const double vx = (q.sxx - q.n * x * x) / denom;
    const double vy = (q.syy - q.n * y * y) / denom;
    const double cxy = (q.sxy - q.n * x * y) / denom;
    const double a = 4.0 * x * y * cxy;
    const double b = (x * x + y * y) * (vx + vy);
    if (a != 0.0) return a / (b + kEps);
    return b == 0.0 ? 1.0 : 0.0;
}

}  // namespace

double mae(const Tensor& pred, const Tensor& gt) {
    map_extent(pred, gt, "mae");
    auto p = pred.data();
    auto g = gt.data();
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - g[i]);
    return s / static_cast<double>(p.size());
}

FMeasureCurve max_f_measure(const Tensor& pred, const Tensor& gt, const MetricsConfig& cfg) {
    map_extent(pred, gt, "max_f_measure");
    const int T = cfg.thresholds;
    // Histogram of the last threshold at which each pixel is still positive.
    std::vector<long> fg_hist(T + 1, 0), bg_hist(T + 1, 0);
    long fg_total = 0;
    auto p = pred.data();
    auto g = gt.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const int k = last_positive_threshold(p[i], T) + 1;
        if (g[i] > 0.5) {
            ++fg_hist[k];
            ++fg_total;
        } else {
            ++bg_hist[k];
        }
    }
    FMeasureCurve out;
    out.precision.resize(T);
    out.recall.resize(T);
    out.f.resize(T);
    long tp = 0, fp = 0;
    for (int k = T - 1; k >= 0; --k) {
        tp += fg_hist[k + 1];
        fp += bg_hist[k + 1];
        const double prec = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
        const double rec = fg_total > 0 ? double(tp) / double(fg_total) : 0.0;
        const double den = cfg.beta_sq * prec + rec;
        const double f = den > 0.0 ? (1.0 + cfg.beta_sq) * prec * rec / den : 0.0;
        out.precision[k] = prec;
        out.recall[k] = rec;
        out.f[k] = f;
    }
    out.max_f = *std::max_element(out.f.begin(), out.f.end());
    return out;
}

double s_measure(const Tensor& pred, const Tensor& gt, const MetricsConfig& cfg) {
    const auto [h, w] = map_extent(pred, gt, "s_measure");
    auto p = pred.data();
    auto g = gt.data();
    const double n = double(h) * w;

    double fg = 0, fg_sum = 0, fg_sq = 0, bg_sum = 0, bg_sq = 0, pred_sum = 0, pred_sq = 0;
    double col_moment = 0, row_moment = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = std::size_t(y) * w + x;
            const double v = p[i];
            pred_sum += v;
            pred_sq += v * v;
            if (g[i] > 0.5) {
                fg += 1;
                fg_sum += v;
                fg_sq += v * v;
                col_moment += x + 1;
                row_moment += y + 1;
            } else {
                bg_sum += 1.0 - v;
                bg_sq += (1.0 - v) * (1.0 - v);
            }
        }
    }
    double score;
    if (fg == 0) {
        score = 1.0 - pred_sum / n;
    } else if (fg == n) {
        score = object_similarity(pred_sum, pred_sq, n);
    } else {
        const double mu = fg / n;
        const double object = mu * object_similarity(fg_sum, fg_sq, fg) +
                              (1.0 - mu) * object_similarity(bg_sum, bg_sq, n - fg);

        // Split at the (1-based, rounded) foreground centroid; quadrant
        // 0 = top-left, 1 = top-right, 2 = bottom-left, 3 = bottom-right.
        const int cx = static_cast<int>(std::round(col_moment / fg));
        const int cy = static_cast<int>(std::round(row_moment / fg));
        Moments q[4];
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = std::size_t(y) * w + x;
                Moments& m = q[(y >= cy ? 2 : 0) + (x >= cx ? 1 : 0)];
                const double a = p[i], b = g[i];
                m.n += 1;
                m.sx += a;
                m.sy += b;
                m.sxx += a * a;
                m.syy += b * b;
                m.sxy += a * b;
            }
        }
        double region = 0.0;
        for (const Moments& m : q) region += (m.n / n) * region_ssim(m);
        score = cfg.alpha * object + (1.0 - cfg.alpha) * region;
    }
    return std::clamp(score, 0.0, 1.0);
}

FrameScores score_frame(const Tensor& pred, const Tensor& gt, const MetricsConfig& cfg) {
    return {s_measure(pred, gt, cfg), max_f_measure(pred, gt, cfg).max_f, mae(pred, gt)};
}

}  // namespace dctnet::metrics
