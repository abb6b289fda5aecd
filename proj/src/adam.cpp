#include "blockbuild/adam.hpp"

#include <cmath>

namespace blockbuild {

AdamState::AdamState(const std::vector<Tensor>& params, AdamConfig config) : config_(config) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor& p : params) {
        m_.emplace_back(p.data().size(), 0.0f);
        v_.emplace_back(p.data().size(), 0.0f);
    }
}

void AdamState::step(std::vector<Tensor>& params, const std::vector<std::vector<float>>& grads,
                     double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw ShapeMismatch("adam step: parameter/gradient count mismatch");
    }
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi].data();
        const auto& g = grads[pi];
        if (g.size() != p.size()) {
            throw ShapeMismatch("adam step: gradient size mismatch at parameter " +
                                std::to_string(pi));
        }
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i];
            m[i] = static_cast<float>(b1 * m[i] + (1.0 - b1) * gi);
            v[i] = static_cast<float>(b2 * v[i] + (1.0 - b2) * gi * gi);
            const double mhat = m[i] / bias1;
            const double vhat = v[i] / bias2;
            p[i] = static_cast<float>(p[i] - lr * mhat / (std::sqrt(vhat) + config_.eps));
        }
    }
}

void AdamState::step(std::vector<Tensor>& params, double lr) {
    std::vector<std::vector<float>> grads;
    grads.reserve(params.size());
    for (Tensor& p : params) {
        if (!p.requires_grad()) {
            grads.emplace_back(p.data().size(), 0.0f);
        } else {
            grads.push_back(p.grad());
        }
    }
    step(params, grads, lr);
}

} // namespace blockbuild
