#pragma once

#include <functional>

#include "dctnet/tensor.hpp"

namespace dctnet {

using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Compares the taped gradient of scalar `f` at `x` with central differences.
///
/// Returns max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
/// `x` is perturbed in place and restored. It may be a parameter that `f`
/// reads through a module rather than through its argument.
double grad_check(const ScalarFn& f, Tensor x, double step = 1e-5);

}  // namespace dctnet
