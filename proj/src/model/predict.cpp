#include "dctnet/model/predict.hpp"

#include <algorithm>

#include "dctnet/data/dataset_io.hpp"
#include "dctnet/model/train.hpp"

namespace dctnet::model {

std::vector<Tensor> predict_clip(DctNet& model, const data::Clip& clip, int batch_size) {
    NoGradScope no_grad;
    const std::vector<FrameInput> frames = prepare_clip(clip);
    std::vector<Tensor> out;
    for (std::size_t start = 0; start < frames.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(frames.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<const FrameInput*> picked;
        for (std::size_t i = start; i < end; ++i) picked.push_back(&frames[i]);
        const Batch batch = make_batch(picked);
        const SideOutputs s = model.forward(batch.rgb, batch.depth, batch.flow, Mode::Eval);
        const int h = batch.gt.dim(2), w = batch.gt.dim(3);
        const Tensor& finest = s.level(1);
        const Tensor prob = ops::sigmoid(ops::resize_bilinear(finest, h, w));
        const std::size_t plane = std::size_t(h) * w;
        for (std::size_t b = 0; b < picked.size(); ++b) {
            auto src = prob.data().subspan(b * plane, plane);
            out.push_back(Tensor::from_data({1, h, w}, std::vector<double>(src.begin(), src.end())));
        }
    }
    return out;
}

void write_predictions(DctNet& model, const data::Dataset& clips, const std::filesystem::path& dir) {
    for (const auto& clip : clips) {
        const auto root = dir / clip.name / "pred";
        std::filesystem::create_directories(root);
        const auto preds = predict_clip(model, clip);
        for (std::size_t i = 0; i < preds.size(); ++i)
            data::write_pgm(root / data::frame_name(static_cast<int>(i), "pgm"), preds[i]);
    }
}

metrics::MetricsReport evaluate_model(DctNet& model, const data::Dataset& clips, const metrics::MetricsConfig& cfg) {
    std::vector<metrics::SequenceMaps> seqs;
    for (const auto& clip : clips) {
        metrics::SequenceMaps s{clip.name, predict_clip(model, clip), {}};
        for (const auto& f : clip.frames) s.gts.push_back(f.gt);
        seqs.push_back(std::move(s));
    }
    return metrics::evaluate_sequences(seqs, cfg);
}

}  // namespace dctnet::model
