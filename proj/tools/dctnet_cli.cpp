// dctnet: data generation, training, evaluation, prediction, ablation and
// gradient verification from the command line.
#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "dctnet/app/commands.hpp"
#include "dctnet/error.hpp"
#include "dctnet/model/config.hpp"

namespace {

using namespace dctnet;

struct Options {
    std::string config;
    std::string data;
    std::string out;
    std::string checkpoint;
    std::string pred_dir;
    std::string scope = "ops";
    std::vector<std::string> eval_data;
    int steps = -1;
    long long seed = -1;
    std::string variant;
};

app::RunConfig resolve(const Options& o) {
    app::RunConfig cfg = o.config.empty() ? app::RunConfig{} : app::load_run_config(o.config);
    if (!o.data.empty()) cfg.data = o.data;
    if (!o.out.empty()) {
        cfg.out = o.out;
    } else if (const char* env = std::getenv("DCTNET_OUT"); env && *env) {
        cfg.out = env;
    }
    if (!o.eval_data.empty()) cfg.eval_data = o.eval_data;
    if (o.steps >= 0) cfg.model.steps = o.steps;
    if (o.seed >= 0) cfg.model.seed = static_cast<std::uint64_t>(o.seed);
    if (!o.variant.empty()) cfg.model.variant = model::parse_variant(o.variant);
    cfg.model.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Depth-cooperated trimodal saliency network toolkit"};
    cli.require_subcommand(1);
    Options o;

    auto add_config = [&](CLI::App* c) { c->add_option("--config", o.config, "RunConfig JSON file")->check(CLI::ExistingFile); };
    auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "output directory (or $DCTNET_OUT)"); };
    auto add_data = [&](CLI::App* c) { c->add_option("--data", o.data, "dataset directory"); };
    auto add_overrides = [&](CLI::App* c) {
        c->add_option("--steps", o.steps, "override model.steps");
        c->add_option("--seed", o.seed, "override model.seed");
        c->add_option("--variant", o.variant, "override model.variant (A1, B1, B2, C1-C4, Ours)");
    };

    auto* gen = cli.add_subcommand("gen-data", "generate a synthetic trimodal dataset");
    add_config(gen);
    add_out(gen);

    auto* train = cli.add_subcommand("train", "train a model and write a checkpoint and loss log");
    add_config(train);
    add_data(train);
    add_out(train);
    add_overrides(train);

    auto* eval = cli.add_subcommand("eval", "score a checkpoint or a prediction directory");
    add_config(eval);
    auto* ck = eval->add_option("--checkpoint", o.checkpoint, "checkpoint directory");
    auto* pd = eval->add_option("--pred-dir", o.pred_dir, "directory of <clip>/pred/NNNN.pgm maps");
    ck->excludes(pd);
    add_data(eval);
    add_out(eval);

    auto* predict = cli.add_subcommand("predict", "write 8-bit saliency maps");
    predict->add_option("--checkpoint", o.checkpoint, "checkpoint directory")->required();
    add_data(predict);
    add_out(predict);

    auto* grad = cli.add_subcommand("gradcheck", "finite-difference gradient verification");
    grad->add_option("--scope", o.scope, "ops, blocks, model or all")
        ->check(CLI::IsMember({"ops", "blocks", "model", "all"}));

    auto* ablate = cli.add_subcommand("ablate", "train all eight variants and report per split");
    add_config(ablate);
    add_data(ablate);
    ablate->add_option("--eval-data", o.eval_data, "held-out dataset directories");
    add_out(ablate);
    add_overrides(ablate);

    try {
        cli.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cli.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[usage]: " << e.what() << '\n';
        return app::kExitConfig;
    }

    try {
        if (grad->parsed()) return app::gradcheck(o.scope, std::cout);
        const app::RunConfig cfg = resolve(o);
        if (gen->parsed()) {
            app::gen_data(cfg, cfg.out, std::cout);
        } else if (train->parsed()) {
            app::train(cfg, cfg.data, cfg.out, std::cout);
        } else if (eval->parsed()) {
            app::eval(cfg, o.checkpoint, o.pred_dir, cfg.data, cfg.out, std::cout);
        } else if (predict->parsed()) {
            app::predict(o.checkpoint, cfg.data, cfg.out, std::cout);
        } else if (ablate->parsed()) {
            app::ablate(cfg, cfg.data, cfg.eval_data, cfg.out, std::cout);
        }
    } catch (const std::exception& e) {
        const auto [code, line] = app::describe_failure(e);
        std::cerr << line << '\n';
        return code;
    }
    return app::kExitOk;
}
