#pragma once

#include <filesystem>
#include <vector>

#include "dctnet/data/synth.hpp"
#include "dctnet/metrics/report.hpp"
#include "dctnet/model/network.hpp"

namespace dctnet::model {

/// Saliency probabilities [1,H,W] per frame: sigmoid of the finest side
/// output, resized to the frame resolution. Eval mode, no tape.
std::vector<Tensor> predict_clip(DctNet& model, const data::Clip& clip, int batch_size = 4);

/// Writes <dir>/<clip>/pred/NNNN.pgm for every clip.
void write_predictions(DctNet& model, const data::Dataset& clips, const std::filesystem::path& dir);

/// In-memory evaluation of the model on every clip.
metrics::MetricsReport evaluate_model(DctNet& model, const data::Dataset& clips, const metrics::MetricsConfig& cfg = {});

}  // namespace dctnet::model
