#pragma once

#include <cstdint>
#include <vector>

#include "gtsad/tensor.hpp"

namespace gtsad {

struct AdamConfig {
    double learningRate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// ADAM with bias correction over an ordered list of parameter tensors.
/// Moment tensors shape-match the parameters they were created for; the
/// update is deterministic given inputs.
class AdamState {
public:
    AdamState(AdamConfig config, const std::vector<const Tensor*>& params);

    /// One update step. params and grads must match the construction shapes.
    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

    int64_t stepCount() const { return step_; }
    const AdamConfig& config() const { return config_; }
    const std::vector<Tensor>& firstMoments() const { return m_; }
    const std::vector<Tensor>& secondMoments() const { return v_; }

private:
    AdamConfig config_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    int64_t step_ = 0;
};

} // namespace gtsad
