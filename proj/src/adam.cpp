#include "gtsad/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gtsad {

AdamState::AdamState(AdamConfig config, const std::vector<const Tensor*>& params) : config_(config) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor* p : params) {
        m_.push_back(Tensor::zeros(p->shape()));
        v_.push_back(Tensor::zeros(p->shape()));
    }
}

void AdamState::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw std::invalid_argument("adam: expected " + std::to_string(m_.size()) + " tensors, got " +
                                    std::to_string(params.size()) + " params / " +
                                    std::to_string(grads.size()) + " grads");
    }
    ++step_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        if (!p.sameShape(m_[i]) || !g.sameShape(m_[i])) {
            throw std::invalid_argument("adam: tensor " + std::to_string(i) + " shape " + p.shapeString() +
                                        "/" + g.shapeString() + " does not match state " +
                                        m_[i].shapeString());
        }
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (int k = 0; k < p.size(); ++k) {
            const double gk = g[k];
            m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * gk;
            v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * gk * gk;
            const double mHat = m[k] / c1;
            const double vHat = v[k] / c2;
            p[k] -= config_.learningRate * mHat / (std::sqrt(vHat) + config_.epsilon);
        }
    }
}

} // namespace gtsad
