#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dctnet/data/synth.hpp"
#include "dctnet/model/network.hpp"

namespace dctnet::model {

/// Frame tensors in the layout the network consumes: flow is rendered into a
/// 3-channel color image, depth stays single-channel.
struct FrameInput {
    Tensor rgb;    // [3,H,W]
    Tensor depth;  // [1,H,W]
    Tensor flow;   // [3,H,W] color-coded
    Tensor gt;     // [1,H,W]
};

FrameInput prepare_frame(const data::TrimodalSample& s);
std::vector<FrameInput> prepare_clip(const data::Clip& clip);

struct Batch {
    Tensor rgb, depth, flow, gt;  // [B,C,H,W]
    int size() const { return rgb.dim(0); }
};

Batch make_batch(std::span<const FrameInput* const> frames);

/// SGD with momentum. Weight decay is folded into the gradient
/// (g += wd * theta; v = mu v + g; theta -= lr v), so lr = 0 freezes every
/// parameter exactly.
class Sgd {
public:
    Sgd(nn::ParameterList params, double lr_backbone, double lr_head, double momentum, double weight_decay);

    void zero_grad();
    void step();

    const nn::ParameterList& parameters() const { return params_; }
    std::vector<std::vector<double>>& velocity() { return velocity_; }

private:
    nn::ParameterList params_;
    double lr_[2];
    double momentum_;
    double weight_decay_;
    std::vector<std::vector<double>> velocity_;
};

struct StepResult {
    double loss = 0.0;
    std::array<double, kLevels> per_level{};
};

/// Forward (train mode), loss, backward and one optimizer update. Throws
/// NumericalError naming the first non-finite tensor when the loss is not finite.
StepResult train_step(DctNet& model, const Batch& batch, Sgd& optimizer);

/// Loss on a batch without touching parameters or statistics (eval mode).
double evaluate_loss(DctNet& model, const Batch& batch);

struct LogEntry {
    int step = 0;
    double loss = 0.0;
    std::array<double, kLevels> per_level{};
};

struct TrainingLog {
    std::vector<LogEntry> entries;

    /// "step,loss,loss_s1,...,loss_s5" with round-trip precision.
    std::string csv() const;
    void write_csv(const std::filesystem::path& path) const;
};

struct FitOptions {
    /// Called after every step; return false to stop early.
    std::function<bool(const LogEntry&)> on_step;
};

/// Runs config.steps optimizer steps over shuffled frames of `clips`, all
/// drawn from the model's seed. Batches hold config.batch_size frames
/// (fewer if the dataset is smaller).
TrainingLog fit(DctNet& model, const data::Dataset& clips, const FitOptions& options = {});

}  // namespace dctnet::model
