#pragma once

#include <vector>

#include "civae/tensor.hpp"

namespace civae::ad {

/// Adam with bias correction (Kingma & Ba defaults beta1=0.9, beta2=0.999,
/// eps=1e-8). Moment buffers are allocated on first use and must keep
/// matching the parameter shapes afterwards.
///
/// weight_decay > 0 applies decoupled decay (p *= 1 - lr*decay) before the
/// Adam update. Left at 0 this is the plain bias-corrected rule. The decay
/// anchors the latent scale of fused-posterior models: with free-form
/// decoders, prior variance and decoder gain form an unpenalized symmetry
/// that otherwise drifts until the encoder ELBO is frozen out.
struct AdamState {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    long long step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    explicit AdamState(double lr_ = 5e-4, double weight_decay_ = 0.0)
        : lr(lr_), weight_decay(weight_decay_) {}
};

/// Applies one update in place. If any gradient entry is non-finite the step
/// is skipped entirely (parameters, moments and counter untouched) and false
/// is returned so the caller can log the incident.
bool adam_step(AdamState& state, const std::vector<Tensor*>& params,
               const std::vector<Tensor>& grads);

} // namespace civae::ad
