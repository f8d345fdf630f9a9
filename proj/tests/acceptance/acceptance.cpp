// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset, e.g. `dctnet_acceptance 5 6`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "dctnet/app/commands.hpp"
#include "dctnet/app/verify.hpp"
#include "dctnet/data/dataset_io.hpp"
#include "dctnet/fusion/attention.hpp"
#include "dctnet/model/checkpoint.hpp"
#include "dctnet/model/loss.hpp"
#include "dctnet/model/predict.hpp"
#include "dctnet/model/train.hpp"
#include "oracles/metric_oracles.hpp"

using namespace dctnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Tensor uniform(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(v));
}

Tensor binary(Shape shape, Rng& rng, double p) {
    Tensor t = uniform(std::move(shape), rng);
    for (double& v : t.data()) v = v < p ? 1.0 : 0.0;
    return t;
}

fs::path scratch_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("dctnet_acceptance_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    const auto results = app::run_gradcheck_suite("all");
    const double secs = seconds_since(t0);
    double worst_op = 0, worst_other = 0;
    int failed = 0;
    for (const auto& r : results) {
        (r.scope == "ops" ? worst_op : worst_other) = std::max(r.scope == "ops" ? worst_op : worst_other, r.error);
        failed += !r.passed();
    }
    const bool ok = failed == 0 && worst_op <= app::kOpTolerance && worst_other <= app::kBlockTolerance && secs <= 180;
    return {ok, std::to_string(results.size()) + " checks, " + std::to_string(failed) + " failed, worst op " +
                    fmt("%.2e", worst_op) + ", worst block/model " + fmt("%.2e", worst_other) + ", " + fmt("%.1f s", secs)};
}

Outcome attention_normalization() {
    Rng rng(2024);
    fusion::MultiModalAttention mam(16, 2, rng);
    double worst = 0;
    bool in_range = true;
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 2 + trial % 4, w = 2 + (trial / 4) % 4;
        const double scale = 0.5 + trial % 7;
        const Tensor x = uniform({2, 16, h, w}, rng, -scale, scale);
        const std::array<Tensor, 2> aux{uniform({2, 16, h, w}, rng, -scale, scale), uniform({2, 16, h, w}, rng, -scale, scale)};
        const auto out = mam.forward(x, aux, nn::Mode::Train);
        for (const auto& a : out.affinity) {
            const int n = a.dim(1);
            for (std::size_t row = 0; row < a.numel() / n; ++row) {
                double s = 0;
                for (int j = 0; j < n; ++j) {
                    const double v = a.data()[row * n + j];
                    in_range = in_range && v >= 0.0 && v <= 1.0;
                    s += v;
                }
                worst = std::max(worst, std::abs(s - 1.0));
            }
        }
    }
    return {in_range && worst <= 1e-9, "100 inputs, max |row sum - 1| = " + fmt("%.2e", worst) +
                                           (in_range ? ", entries in [0,1]" : ", entries out of range")};
}

Outcome metric_oracles() {
    const auto t0 = Clock::now();
    Rng rng(77);
    double worst_mae = 0, worst_f = 0, worst_s = 0;
    for (int i = 0; i < 1000; ++i) {
        const Tensor p = uniform({4, 4}, rng), g = binary({4, 4}, rng, 0.1 + 0.8 * rng.uniform());
        const auto pg = oracle::to_grid(p), gg = oracle::to_grid(g);
        worst_mae = std::max(worst_mae, std::abs(metrics::mae(p, g) - oracle::mae(pg, gg)));
        worst_f = std::max(worst_f, std::abs(metrics::max_f_measure(p, g).max_f - oracle::max_f(pg, gg, 256, 0.3)));
    }
    for (int i = 0; i < 200; ++i) {
        const Tensor p = uniform({8, 8}, rng), g = binary({8, 8}, rng, 0.05 + 0.9 * rng.uniform());
        worst_s = std::max(worst_s, std::abs(metrics::s_measure(p, g) - oracle::s_measure(oracle::to_grid(p), oracle::to_grid(g), 0.5)));
    }
    const double secs = seconds_since(t0);
    return {worst_mae <= 1e-12 && worst_f <= 1e-12 && worst_s <= 1e-9 && secs <= 60,
            "1000 4x4: mae " + fmt("%.1e", worst_mae) + ", max-F " + fmt("%.1e", worst_f) + "; 200 8x8: S " +
                fmt("%.1e", worst_s) + "; " + fmt("%.2f s", secs)};
}

Outcome loss_contract() {
    Rng rng(5);
    const Tensor gt = binary({2, 1, 64, 64}, rng, 0.3);
    model::SideOutputs perfect;
    for (int level = 1; level <= model::kLevels; ++level) {
        Tensor l = gt.clone();
        for (double& v : l.data()) v = v > 0.5 ? 40.0 : -40.0;
        perfect.logits[level - 1] = l;
    }
    const double best = model::loss_total(perfect, gt).total.item();

    model::ModelConfig cfg;
    model::DctNet net(cfg);
    const model::SideOutputs out = net.forward(uniform({2, 3, 64, 64}, rng), uniform({2, 1, 64, 64}, rng),
                                               uniform({2, 3, 64, 64}, rng), nn::Mode::Eval);
    bool exact = true;
    std::string ratios;
    for (int level = 1; level <= model::kLevels; ++level) {
        std::array<bool, model::kLevels> only{};
        only[level - 1] = true;
        const double isolated = model::loss_total(out, gt, only).total.item();
        const double raw = model::level_loss(out.level(level), gt).item();
        const double ratio = isolated / raw;
        exact = exact && ratio == 1.0 / (1 << (level - 1));
        ratios += (level > 1 ? " " : "") + fmt("%.5g", ratio);
    }
    return {best <= 1e-6 && exact, "perfect loss " + fmt("%.2e", best) + ", level ratios " + ratios};
}

Outcome overfit() {
    const auto t0 = Clock::now();
    data::ClipSpec spec;
    spec.seed = 3;
    spec.frames = 8;
    spec.size = 64;
    const data::Dataset clip{data::make_clip("overfit", spec)};
    model::ModelConfig cfg;
    cfg.steps = 300;
    cfg.lr_backbone = 1e-2;
    cfg.lr_head = 1e-1;
    model::DctNet net(cfg);
    const model::TrainingLog log = model::fit(net, clip);
    const double first = log.entries.front().loss, last = log.entries.back().loss;
    const auto report = model::evaluate_model(net, clip);
    const double secs = seconds_since(t0);
    const bool ok = last < 0.1 * first && report.max_f >= 0.95 && report.s_measure >= 0.90 && report.mae <= 0.05 && secs <= 600;
    return {ok, "loss " + fmt("%.4f", first) + " -> " + fmt("%.4f", last) + " (" + fmt("%.1f%%", 100 * last / first) +
                    "), max-F " + fmt("%.4f", report.max_f) + ", S " + fmt("%.4f", report.s_measure) + ", MAE " +
                    fmt("%.4f", report.mae) + ", " + std::to_string(cfg.steps) + " steps, " + fmt("%.0f s", secs)};
}

// Static, low-contrast objects over texture: appearance barely separates
// them, motion not at all, depth cleanly.
data::Dataset depth_discriminative(std::uint64_t seed0, int clips, const std::string& prefix) {
    data::Dataset ds;
    for (int i = 0; i < clips; ++i) {
        data::ClipSpec s;
        s.seed = seed0 + i;
        s.frames = 8;
        s.size = 64;
        s.n_objects = 1 + i % 2;
        s.contrast = 0.05;
        s.static_objects = true;
        s.background = data::Background::Textured;
        char name[32];
        std::snprintf(name, sizeof name, "%s_%02d", prefix.c_str(), i);
        ds.push_back(data::make_clip(name, s));
    }
    return ds;
}

Outcome ablation() {
    const auto t0 = Clock::now();
    const data::Dataset train = depth_discriminative(100, 5, "train");
    const data::Dataset held = depth_discriminative(200, 3, "heldout");
    model::ModelConfig cfg;
    cfg.steps = 200;
    cfg.lr_backbone = 1e-2;
    cfg.lr_head = 1e-1;
    const fs::path out = scratch_dir("ablation");
    std::ostringstream log;
    std::vector<app::AblationSplit> splits;
    try {
        splits = app::run_ablation(cfg, train, {{"heldout", held}}, {}, out, log);
    } catch (const std::exception& e) {
        return {false, std::string("training failed: ") + e.what()};
    }
    std::cout << splits[0].csv();
    const std::string csv = slurp(out / "ablation_heldout.csv");
    const bool shaped = std::count(csv.begin(), csv.end(), '\n') == 9 && splits[0].rows.size() == 8;
    const double full = splits[0].row("Ours").mae, a1 = splits[0].row("A1").mae;
    bool finite = true;
    for (const auto& r : splits[0].rows) finite = finite && std::isfinite(r.mae) && std::isfinite(r.max_f) && std::isfinite(r.s_measure);
    return {shaped && finite && full <= a1 + 0.01, "held-out MAE Full " + fmt("%.4f", full) + " vs A1 " + fmt("%.4f", a1) +
                                                       ", 8 variants x 200 steps, " + fmt("%.0f s", seconds_since(t0))};
}

Outcome determinism() {
    model::ModelConfig cfg;
    cfg.input_size = 32;
    cfg.steps = 20;
    cfg.batch_size = 2;
    cfg.seed = 11;
    data::ClipSpec spec;
    spec.seed = 9;
    spec.size = 32;
    spec.frames = 4;
    std::string logs[2];
    std::vector<std::pair<std::string, std::string>> files[2];
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = scratch_dir("determinism_" + std::to_string(run));
        data::write_dataset({data::make_clip("clip_00", spec), data::make_clip("clip_01", [&] {
                                 auto s = spec;
                                 s.seed = 10;
                                 return s;
                             }())},
                            dir / "data");
        const data::Dataset ds = data::read_dataset(dir / "data");
        model::DctNet net(cfg);
        const model::TrainingLog log = model::fit(net, ds);
        log.write_csv(dir / "loss_log.csv");
        model::save_checkpoint(dir / "checkpoint", net, cfg.steps);
        logs[run] = slurp(dir / "loss_log.csv");
        for (const auto& e : fs::directory_iterator(dir / "checkpoint")) files[run].emplace_back(e.path().filename(), slurp(e.path()));
        std::sort(files[run].begin(), files[run].end());
    }
    const bool ok = !logs[0].empty() && logs[0] == logs[1] && files[0] == files[1] && !files[0].empty();
    return {ok, "loss log " + std::to_string(logs[0].size()) + " bytes, " + std::to_string(files[0].size()) +
                    " checkpoint files, " + (ok ? "byte-identical" : "differ")};
}

Outcome shapes() {
    std::string detail;
    bool ok = true;
    for (int size : {32, 64, 96}) {
        model::ModelConfig cfg;
        cfg.input_size = size;
        model::DctNet net(cfg);
        Rng rng(size);
        model::ForwardTrace trace;
        const int c = cfg.cp_width;
        const auto out = net.forward(uniform({1, 3, size, size}, rng), uniform({1, 1, size, size}, rng),
                                     uniform({1, 3, size, size}, rng), nn::Mode::Eval, &trace);
        for (int level = 1; level <= model::kLevels; ++level) {
            const int s = size >> level;
            ok = ok && out.level(level).shape() == Shape{1, 1, s, s};
            ok = ok && trace.fused[level - 1].shape() == Shape{1, c, s, s};
            ok = ok && trace.decoder[level - 1].shape() == Shape{1, c, s, s};
            for (const auto& p : trace.pyramids) ok = ok && p && p->level(level).shape() == Shape{1, c, s, s};
        }
        ok = ok && trace.attention_levels == std::vector<int>{3, 4, 5} && trace.affinities.size() == 6;
        for (std::size_t i = 0; i < trace.affinities.size(); ++i) {
            const int s = size >> (3 + static_cast<int>(i) / 2);
            ok = ok && trace.affinities[i].shape() == Shape{1, s * s, s * s};
        }
        detail += (detail.empty() ? "" : ", ") + std::to_string(size) + " -> side " + std::to_string(size / 2) + ".." +
                  std::to_string(size / 32);
    }
    return {ok, detail + "; attention at levels 3,4,5 only"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient suite", gradient_suite},   {"attention normalization", attention_normalization},
        {"metric oracles", metric_oracles},   {"loss contract", loss_contract},
        {"overfit oracle", overfit},          {"ablation smoke matrix", ablation},
        {"determinism", determinism},         {"shape suite", shapes},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
