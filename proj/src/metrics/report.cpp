#include "dctnet/metrics/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "dctnet/data/dataset_io.hpp"
#include "dctnet/error.hpp"

namespace dctnet::metrics {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void add_scaled(std::vector<double>& acc, const std::vector<double>& v, double s) {
    if (acc.empty()) acc.assign(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] += s * v[i];
}

}  // namespace

MetricsReport evaluate_sequences(const std::vector<SequenceMaps>& sequences, const MetricsConfig& cfg) {
    cfg.validate();
    std::vector<const SequenceMaps*> order;
    for (const auto& s : sequences) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->name < b->name; });

    MetricsReport report;
    report.config = cfg;
    for (const SequenceMaps* s : order) {
        if (s->preds.size() != s->gts.size()) {
            throw DataError("sequence " + s->name + ": " + std::to_string(s->preds.size()) + " predictions for " +
                            std::to_string(s->gts.size()) + " ground-truth frames");
        }
        if (s->preds.empty()) throw DataError("sequence " + s->name + " has no frames");
        SequenceMetrics m;
        m.name = s->name;
        m.frames = static_cast<int>(s->preds.size());
        const double inv = 1.0 / m.frames;
        for (std::size_t t = 0; t < s->preds.size(); ++t) {
            const FMeasureCurve curve = max_f_measure(s->preds[t], s->gts[t], cfg);
            m.s_measure += s_measure(s->preds[t], s->gts[t], cfg);
            m.max_f += curve.max_f;
            m.mae += mae(s->preds[t], s->gts[t]);
            add_scaled(m.precision, curve.precision, inv);
            add_scaled(m.recall, curve.recall, inv);
        }
        m.s_measure *= inv;
        m.max_f *= inv;
        m.mae *= inv;
        report.sequences.push_back(std::move(m));
    }
    if (!report.sequences.empty()) {
        const double inv = 1.0 / static_cast<double>(report.sequences.size());
        for (const auto& m : report.sequences) {
            report.s_measure += m.s_measure;
            report.max_f += m.max_f;
            report.mae += m.mae;
            add_scaled(report.precision, m.precision, inv);
            add_scaled(report.recall, m.recall, inv);
        }
        report.s_measure *= inv;
        report.max_f *= inv;
        report.mae *= inv;
    }
    return report;
}

std::string MetricsReport::csv() const {
    std::string out = "sequence,s_measure,max_f,mae\n";
    for (const auto& m : sequences) out += m.name + "," + fmt(m.s_measure) + "," + fmt(m.max_f) + "," + fmt(m.mae) + "\n";
    out += "mean," + fmt(s_measure) + "," + fmt(max_f) + "," + fmt(mae) + "\n";
    return out;
}

std::string MetricsReport::json() const {
    nlohmann::json j;
    j["config"] = config;
    j["aggregate"] = {{"s_measure", s_measure}, {"max_f", max_f}, {"mae", mae}};
    j["precision"] = precision;
    j["recall"] = recall;
    j["sequences"] = nlohmann::json::array();
    for (const auto& m : sequences) {
        j["sequences"].push_back({{"name", m.name},
                                  {"frames", m.frames},
                                  {"s_measure", m.s_measure},
                                  {"max_f", m.max_f},
                                  {"mae", m.mae},
                                  {"precision", m.precision},
                                  {"recall", m.recall}});
    }
    return j.dump(2) + "\n";
}

void MetricsReport::write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "metrics.csv") << csv();
    std::ofstream(dir / "metrics.json") << json();
}

MetricsReport evaluate_prediction_dir(const std::filesystem::path& pred_dir, const std::filesystem::path& data_dir,
                                      const MetricsConfig& cfg) {
    std::vector<SequenceMaps> seqs;
    std::vector<std::string> missing;
    for (const auto& entry : data::read_manifest(data_dir)) {
        SequenceMaps s{entry.name, {}, {}};
        for (int i = 0; i < entry.frames; ++i) {
            const auto pred_path = pred_dir / entry.name / "pred" / data::frame_name(i, "pgm");
            if (!std::filesystem::exists(pred_path)) {
                missing.push_back(entry.name + "/pred/" + data::frame_name(i, "pgm"));
                continue;
            }
            s.preds.push_back(data::read_pgm(pred_path));
            s.gts.push_back(data::read_pgm(data_dir / entry.name / "gt" / data::frame_name(i, "pgm")));
        }
        seqs.push_back(std::move(s));
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing.size() && i < 8; ++i) list += (i ? ", " : "") + missing[i];
        if (missing.size() > 8) list += ", ...";
        throw DataError(std::to_string(missing.size()) + " prediction(s) missing under " + pred_dir.string() + ": " + list);
    }
    return evaluate_sequences(seqs, cfg);
}

}  // namespace dctnet::metrics
