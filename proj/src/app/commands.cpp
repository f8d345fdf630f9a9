#include "dctnet/app/commands.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>

#include "dctnet/app/verify.hpp"
#include "dctnet/data/dataset_io.hpp"
#include "dctnet/error.hpp"
#include "dctnet/model/checkpoint.hpp"
#include "dctnet/model/predict.hpp"
#include "dctnet/model/train.hpp"

namespace dctnet::app {

namespace {

std::string fixed(double v, int digits = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void require_path(const fs::path& p, const char* flag) {
    if (p.empty()) throw ConfigError(std::string("missing ") + flag);
}

model::TrainingLog train_with_progress(model::DctNet& net, const data::Dataset& clips, std::ostream& log) {
    const int steps = net.config().steps;
    const int every = std::max(1, steps / 10);
    model::FitOptions opts;
    opts.on_step = [&](const model::LogEntry& e) {
        if (e.step % every == 0 || e.step + 1 == steps) log << "  step " << e.step << " loss " << fixed(e.loss, 5) << '\n';
        return true;
    };
    return model::fit(net, clips, opts);
}

}  // namespace

void gen_data(const RunConfig& config, const fs::path& out, std::ostream& log) {
    require_path(out, "--out");
    const data::Dataset clips = generate_dataset(config.generate);
    data::write_dataset(clips, out);
    echo_run_config(config, out);
    log << "wrote " << clips.size() << " clips to " << out.string() << '\n';
}

void train(const RunConfig& config, const fs::path& data, const fs::path& out, std::ostream& log) {
    require_path(data, "--data");
    require_path(out, "--out");
    echo_run_config(config, out);
    const data::Dataset clips = data::read_dataset(data);
    model::DctNet net(config.model);
    log << "training " << model::variant_id(config.model.variant) << " for " << config.model.steps << " steps on "
        << clips.size() << " clips\n";
    const model::TrainingLog tlog = train_with_progress(net, clips, log);
    tlog.write_csv(out / "loss_log.csv");
    model::save_checkpoint(out / "checkpoint", net, static_cast<int>(tlog.entries.size()));
    log << "checkpoint written to " << (out / "checkpoint").string() << '\n';
}

metrics::MetricsReport eval(const RunConfig& config, const fs::path& checkpoint, const fs::path& pred_dir,
                            const fs::path& data, const fs::path& out, std::ostream& log) {
    require_path(data, "--data");
    require_path(out, "--out");
    if (checkpoint.empty() == pred_dir.empty()) throw ConfigError("eval needs exactly one of --checkpoint and --pred-dir");
    metrics::MetricsReport report;
    if (!pred_dir.empty()) {
        report = metrics::evaluate_prediction_dir(pred_dir, data, config.metrics);
    } else {
        auto loaded = model::load_checkpoint(checkpoint);
        report = model::evaluate_model(*loaded.model, data::read_dataset(data), config.metrics);
    }
    report.write(out);
    echo_run_config(config, out);
    log << "max_f " << fixed(report.max_f) << "  s_measure " << fixed(report.s_measure) << "  mae " << fixed(report.mae)
        << '\n';
    return report;
}

void predict(const fs::path& checkpoint, const fs::path& data, const fs::path& out, std::ostream& log) {
    require_path(checkpoint, "--checkpoint");
    require_path(data, "--data");
    require_path(out, "--out");
    auto loaded = model::load_checkpoint(checkpoint);
    const data::Dataset clips = data::read_dataset(data);
    model::write_predictions(*loaded.model, clips, out);
    log << "wrote predictions for " << clips.size() << " clips to " << out.string() << '\n';
}

int gradcheck(const std::string& scope, std::ostream& log) {
    const auto results = run_gradcheck_suite(scope);
    log << format_check_table(results);
    for (const auto& r : results)
        if (!r.passed()) return kExitVerification;
    return kExitOk;
}

std::string AblationSplit::csv() const {
    std::string out = "variant,max_f,s_measure,mae\n";
    for (const auto& r : rows) out += r.variant + "," + fixed(r.max_f, 6) + "," + fixed(r.s_measure, 6) + "," + fixed(r.mae, 6) + "\n";
    return out;
}

const AblationRow& AblationSplit::row(const std::string& variant) const {
    for (const auto& r : rows)
        if (r.variant == variant) return r;
    throw ContractError("ablation split " + name + " has no row " + variant);
}

std::vector<AblationSplit> run_ablation(const model::ModelConfig& base, const data::Dataset& train_set,
                                        const std::vector<std::pair<std::string, data::Dataset>>& splits,
                                        const metrics::MetricsConfig& metrics_cfg, const fs::path& out,
                                        std::ostream& log) {
    std::vector<AblationSplit> result;
    for (const auto& s : splits) result.push_back({s.first, {}});
    for (model::Variant v : model::kAllVariants) {
        model::ModelConfig cfg = base;
        cfg.variant = v;
        const std::string id(model::variant_id(v));
        const auto t0 = std::chrono::steady_clock::now();
        model::DctNet net(cfg);
        const model::TrainingLog tlog = model::fit(net, train_set);
        if (!out.empty()) {
            fs::create_directories(out / id);
            tlog.write_csv(out / id / "loss_log.csv");
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log << id << ": final loss " << fixed(tlog.entries.empty() ? 0.0 : tlog.entries.back().loss, 5) << " ("
            << fixed(secs, 1) << " s)";
        for (std::size_t i = 0; i < splits.size(); ++i) {
            const auto report = model::evaluate_model(net, splits[i].second, metrics_cfg);
            result[i].rows.push_back({id, report.max_f, report.s_measure, report.mae});
            log << "  " << splits[i].first << " mae " << fixed(report.mae);
        }
        log << '\n';
    }
    if (!out.empty()) {
        for (const auto& split : result) {
            std::FILE* f = std::fopen((out / ("ablation_" + split.name + ".csv")).c_str(), "wb");
            if (!f) throw DataError("cannot write ablation report in " + out.string());
            const std::string text = split.csv();
            std::fwrite(text.data(), 1, text.size(), f);
            std::fclose(f);
        }
    }
    return result;
}

void ablate(const RunConfig& config, const fs::path& data, const std::vector<std::string>& eval_data,
            const fs::path& out, std::ostream& log) {
    require_path(data, "--data");
    require_path(out, "--out");
    echo_run_config(config, out);
    const data::Dataset train_set = data::read_dataset(data);
    std::vector<std::pair<std::string, data::Dataset>> splits;
    for (const auto& dir : eval_data) {
        fs::path p(dir);
        std::string name = p.filename().string();
        if (name.empty()) name = p.parent_path().filename().string();
        splits.emplace_back(name, data::read_dataset(p));
    }
    if (splits.empty()) splits.emplace_back("train", train_set);
    run_ablation(config.model, train_set, splits, config.metrics, out, log);
}

std::pair<int, std::string> describe_failure(const std::exception& e) {
    auto line = [&](const char* kind) {
        std::string msg = e.what();
        for (char& c : msg)
            if (c == '\n') c = ' ';
        return std::string("error[") + kind + "]: " + msg;
    };
    if (dynamic_cast<const SpecError*>(&e)) return {kExitConfig, line("spec")};
    if (dynamic_cast<const ConfigError*>(&e)) return {kExitConfig, line("config")};
    if (dynamic_cast<const DimensionError*>(&e)) return {kExitConfig, line("dimension")};
    if (dynamic_cast<const ParseError*>(&e)) return {kExitData, line("parse")};
    if (dynamic_cast<const DataError*>(&e)) return {kExitData, line("data")};
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return {kExitData, line("io")};
    if (dynamic_cast<const VerificationError*>(&e)) return {kExitVerification, line("verification")};
    if (dynamic_cast<const NumericalError*>(&e)) return {kExitInternal, line("numerical")};
    if (dynamic_cast<const ContractError*>(&e)) return {kExitInternal, line("contract")};
    return {kExitInternal, line("internal")};
}

}  // namespace dctnet::app
