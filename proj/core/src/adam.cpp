#include "civae/adam.hpp"

#include <cmath>
#include <string>

#include "civae/errors.hpp"

namespace civae::ad {

bool adam_step(AdamState& state, const std::vector<Tensor*>& params,
               const std::vector<Tensor>& grads) {
    if (params.size() != grads.size())
        throw ConfigError("adam: " + std::to_string(params.size()) + " parameters but " +
                          std::to_string(grads.size()) + " gradients");
    if (state.m.empty()) {
        for (const Tensor* p : params) {
            state.m.push_back(Tensor::zeros(p->shape));
            state.v.push_back(Tensor::zeros(p->shape));
        }
    }
    if (state.m.size() != params.size())
        throw ConfigError("adam: state was initialized for a different parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(grads[i]))
            throw ConfigError("adam: parameter/gradient shape mismatch at index " +
                              std::to_string(i) + ": " + shape_str(params[i]->shape) + " vs " +
                              shape_str(grads[i].shape));
        if (!grads[i].finite()) return false;
    }

    state.step += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    const double shrink = 1.0 - state.lr * state.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i]->data;
        const auto& g = grads[i].data;
        auto& m = state.m[i].data;
        auto& v = state.v[i].data;
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            p[j] = shrink * p[j] - state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
    return true;
}

} // namespace civae::ad
