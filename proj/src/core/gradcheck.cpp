#include "dctnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dctnet/error.hpp"

namespace dctnet {

double grad_check(const ScalarFn& f, Tensor x, double step) {
    const bool had_grad = x.requires_grad();
    std::vector<double> saved_grad;
    if (had_grad) {
        auto g = x.grad();
        saved_grad.assign(g.begin(), g.end());
    }
    x.set_requires_grad(true);

    std::vector<double> analytic;
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor y = f(x);
        if (y.numel() != 1) throw ContractError("grad_check: function must be scalar-valued");
        tape.backward(y);
        auto g = x.grad();
        analytic.assign(g.begin(), g.end());
    }

    double worst = 0.0;
    {
        NoGradScope no_grad;
        auto data = x.data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double orig = data[i];
            data[i] = orig + step;
            const double plus = f(x).item();
            data[i] = orig - step;
            const double minus = f(x).item();
            data[i] = orig;
            const double numeric = (plus - minus) / (2.0 * step);
            const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
            worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
        }
    }

    x.set_requires_grad(had_grad);
    if (had_grad) std::copy(saved_grad.begin(), saved_grad.end(), x.grad().begin());
    return worst;
}

}  // namespace dctnet
