#include "dctnet/model/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dctnet/error.hpp"
#include "dctnet/model/loss.hpp"

namespace dctnet::model {

FrameInput prepare_frame(const data::TrimodalSample& s) {
    return {s.rgb, s.depth, data::flow_to_color(s.flow), s.gt};
}

std::vector<FrameInput> prepare_clip(const data::Clip& clip) {
    std::vector<FrameInput> out;
    out.reserve(clip.frames.size());
    for (const auto& f : clip.frames) out.push_back(prepare_frame(f));
    return out;
}

namespace {

Tensor stack(std::span<const FrameInput* const> frames, Tensor FrameInput::*field) {
    const Tensor& first = frames.front()->*field;
    Shape shape{static_cast<int>(frames.size())};
    shape.insert(shape.end(), first.shape().begin(), first.shape().end());
    std::vector<double> data;
    data.reserve(shape_numel(shape));
    for (const FrameInput* f : frames) {
        const Tensor& t = f->*field;
        if (t.shape() != first.shape()) {
            throw DimensionError("cannot batch frames of shape " + shape_str(first.shape()) + " and " + shape_str(t.shape()));
        }
        data.insert(data.end(), t.data().begin(), t.data().end());
    }
    return Tensor::from_data(std::move(shape), std::move(data));
}

}  // namespace

Batch make_batch(std::span<const FrameInput* const> frames) {
    if (frames.empty()) throw ContractError("make_batch needs at least one frame");
    return {stack(frames, &FrameInput::rgb), stack(frames, &FrameInput::depth), stack(frames, &FrameInput::flow),
            stack(frames, &FrameInput::gt)};
}

Sgd::Sgd(nn::ParameterList params, double lr_backbone, double lr_head, double momentum, double weight_decay)
    : params_(std::move(params)), lr_{lr_backbone, lr_head}, momentum_(momentum), weight_decay_(weight_decay) {
    for (const auto& p : params_.params) velocity_.emplace_back(p.tensor.numel(), 0.0);
}

void Sgd::zero_grad() {
    for (auto& p : params_.params) p.tensor.zero_grad();
}

void Sgd::step() {
    for (std::size_t i = 0; i < params_.params.size(); ++i) {
        auto& p = params_.params[i];
        const double lr = lr_[p.group == nn::ParamGroup::Backbone ? 0 : 1];
        auto theta = p.tensor.data();
        auto g = p.tensor.grad();
        auto& v = velocity_[i];
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const double grad = g[k] + weight_decay_ * theta[k];
            v[k] = momentum_ * v[k] + grad;
            theta[k] -= lr * v[k];
        }
    }
}

namespace {

[[noreturn]] void report_non_finite(const Tape& tape, double loss) {
    for (std::size_t i = 0; i < tape.records().size(); ++i) {
        const auto& r = tape.records()[i];
        if (!ops::all_finite(r.output)) {
            throw NumericalError("loss is " + std::to_string(loss) + "; first non-finite tensor is the output of " +
                                 std::string(r.name) + " (record " + std::to_string(i) + ", shape " +
                                 shape_str(r.output.shape()) + ")");
        }
    }
    throw NumericalError("loss is " + std::to_string(loss) + " although every recorded tensor is finite");
}

}  // namespace

StepResult train_step(DctNet& model, const Batch& batch, Sgd& optimizer) {
    Tape tape;
    StepResult result;
    {
        TapeScope scope(tape);
        const SideOutputs out = model.forward(batch.rgb, batch.depth, batch.flow, Mode::Train);
        const LossBreakdown loss = loss_total(out, batch.gt);
        result.loss = loss.total.item();
        result.per_level = loss.per_level;
        if (!std::isfinite(result.loss)) report_non_finite(tape, result.loss);
        optimizer.zero_grad();
        tape.backward(loss.total);
    }
    optimizer.step();
    return result;
}

double evaluate_loss(DctNet& model, const Batch& batch) {
    NoGradScope no_grad;
    const SideOutputs out = model.forward(batch.rgb, batch.depth, batch.flow, Mode::Eval);
    return loss_total(out, batch.gt).total.item();
}

std::string TrainingLog::csv() const {
    std::string out = "step,loss";
    for (int i = 1; i <= kLevels; ++i) out += ",loss_s" + std::to_string(i);
    out += "\n";
    char buf[32];
    for (const auto& e : entries) {
        out += std::to_string(e.step);
        std::snprintf(buf, sizeof buf, ",%.17g", e.loss);
        out += buf;
        for (double l : e.per_level) {
            std::snprintf(buf, sizeof buf, ",%.17g", l);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os << csv();
}

TrainingLog fit(DctNet& model, const data::Dataset& clips, const FitOptions& options) {
    const ModelConfig& cfg = model.config();
    std::vector<FrameInput> frames;
    for (const auto& clip : clips) {
        if (!clip.frames.empty() && clip.frames[0].rgb.dim(1) != cfg.input_size) {
            throw ConfigError("clip " + clip.name + " has frames of size " + std::to_string(clip.frames[0].rgb.dim(1)) +
                              " but model.input_size is " + std::to_string(cfg.input_size));
        }
        for (const auto& f : clip.frames) frames.push_back(prepare_frame(f));
    }
    if (frames.empty()) throw DataError("training set has no frames");

    Sgd opt(model.parameters(), cfg.lr_backbone, cfg.lr_head, cfg.momentum, cfg.weight_decay);
    Rng rng(cfg.seed ^ 0x5eedf00dULL);
    std::vector<std::size_t> order(frames.size());
    std::size_t cursor = order.size();
    const std::size_t batch_size = std::min<std::size_t>(cfg.batch_size, frames.size());

    TrainingLog log;
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<const FrameInput*> picked;
        while (picked.size() < batch_size) {
            if (cursor == order.size()) {
                for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
                for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
                cursor = 0;
            }
            picked.push_back(&frames[order[cursor++]]);
        }
        const StepResult r = train_step(model, make_batch(picked), opt);
        log.entries.push_back({step, r.loss, r.per_level});
        if (options.on_step && !options.on_step(log.entries.back())) break;
    }
    return log;
}

}  // namespace dctnet::model
