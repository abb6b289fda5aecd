#pragma once

#include "blockbuild/tensor.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace blockbuild {

/// Central-difference verification of reverse-mode gradients, 64-bit only.
/// `f` must rebuild the scalar from the given leaves on every call; the
/// numeric passes run with grad recording switched off on the leaves.
/// Returns max over coordinates of |analytic - numeric| / max(|a|, |n|, 1e-8).
inline double grad_check(const std::function<Tensor64(const std::vector<Tensor64>&)>& f,
                         std::vector<Tensor64> inputs, double eps = 1e-5) {
    for (Tensor64& t : inputs) t.set_requires_grad(true);
    Tensor64 loss = f(inputs);
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (Tensor64& t : inputs) analytic.push_back(t.grad());

    for (Tensor64& t : inputs) t.set_requires_grad(false);
    double worst = 0.0;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor64& t = inputs[ti];
        for (std::size_t i = 0; i < t.data().size(); ++i) {
            const double saved = t.data()[i];
            t.data()[i] = saved + eps;
            const double up = f(inputs).data()[0];
            t.data()[i] = saved - eps;
            const double down = f(inputs).data()[0];
            t.data()[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[ti][i];
            const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace blockbuild
