#pragma once

#include "blockbuild/tensor.hpp"

#include <vector>

namespace blockbuild {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter first/second moment buffers plus the shared step counter.
class AdamState {
public:
    AdamState(const std::vector<Tensor>& params, AdamConfig config = {});

    /// One bias-corrected update over explicit gradients; grads[i] must match
    /// params[i]'s element count. Increments the step counter once.
    void step(std::vector<Tensor>& params, const std::vector<std::vector<float>>& grads, double lr);

    /// Convenience overload reading each parameter's own grad buffer.
    void step(std::vector<Tensor>& params, double lr);

    long long step_count() const { return t_; }
    const AdamConfig& config() const { return config_; }

    // Serialized by the training-state snapshot.
    std::vector<std::vector<float>>& moment1() { return m_; }
    std::vector<std::vector<float>>& moment2() { return v_; }
    const std::vector<std::vector<float>>& moment1() const { return m_; }
    const std::vector<std::vector<float>>& moment2() const { return v_; }
    void set_step_count(long long t) { t_ = t; }

private:
    AdamConfig config_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    long long t_ = 0;
};

} // namespace blockbuild
