#include "dctnet/model/loss.hpp"

#include "dctnet/error.hpp"

namespace dctnet::model {

void require_binary(const Tensor& gt) {
    for (double v : gt.data()) {
        if (v != 0.0 && v != 1.0) throw ContractError("ground truth must be binary (0/1), found " + std::to_string(v));
    }
}

Tensor level_loss(const Tensor& logits, const Tensor& gt) {
    if (logits.rank() != 4 || gt.rank() != 4 || logits.dim(0) != gt.dim(0) || logits.dim(1) != 1 || gt.dim(1) != 1) {
        throw DimensionError("level_loss: logits " + shape_str(logits.shape()) + " vs ground truth " +
                             shape_str(gt.shape()));
    }
    Tensor resized = (logits.dim(2) == gt.dim(2) && logits.dim(3) == gt.dim(3))
                         ? logits
                         : ops::resize_bilinear(logits, gt.dim(2), gt.dim(3));
    Tensor p = ops::sigmoid(resized);
    return ops::add(ops::bce_mean(p, gt), ops::iou_loss(p, gt, kIouEps));
}

LossBreakdown loss_total(const SideOutputs& outputs, const Tensor& gt, const std::array<bool, kLevels>& active) {
    require_binary(gt);
    LossBreakdown out;
    for (int level = 1; level <= kLevels; ++level) {
        if (!active[level - 1]) continue;
        Tensor l = level_loss(outputs.level(level), gt);
        out.per_level[level - 1] = l.item();
        Tensor weighted = ops::scale(l, level_weight(level));
        out.total = out.total.defined() ? ops::add(out.total, weighted) : weighted;
    }
    if (!out.total.defined()) out.total = Tensor::scalar(0.0);
    return out;
}

}  // namespace dctnet::model
