#pragma once

#include <array>

#include "dctnet/model/network.hpp"

namespace dctnet::model {

inline constexpr double kIouEps = 1.0;

/// Deep-supervision weight of decoder level i (1-based): 1 / 2^(i-1).
constexpr double level_weight(int level) { return 1.0 / static_cast<double>(1 << (level - 1)); }

/// BCE + soft IoU of one logit map against ground truth. The logits are
/// bilinearly resized to the ground-truth resolution before the sigmoid.
Tensor level_loss(const Tensor& logits, const Tensor& gt);

struct LossBreakdown {
    Tensor total;
    std::array<double, kLevels> per_level{};  // unweighted l(S_i, G)
};

/// sum_i level_weight(i) * l(S_i, G) over the levels flagged in `active`.
/// Throws ContractError when `gt` is not binary.
LossBreakdown loss_total(const SideOutputs& outputs, const Tensor& gt,
                         const std::array<bool, kLevels>& active = {true, true, true, true, true});

void require_binary(const Tensor& gt);

}  // namespace dctnet::model
