#pragma once

#include <string>
#include <vector>

#include "civae/rng.hpp"
#include "civae/tape.hpp"
#include "civae/tensor.hpp"

namespace civae::models {

enum class Activation { Identity, Tanh, LeakyRelu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

/// One dense layer: y = act(x W + b), W is [in, out].
struct MlpLayer {
    Tensor weight;
    Tensor bias;
    Activation act = Activation::Identity;
};

/// Plain dense feed-forward network. Used directly (ground-truth flows) and
/// as the parameter container behind tape-bound forwards (trained nets).
struct MlpNet {
    std::vector<MlpLayer> layers;

    std::size_t in_dim() const;
    std::size_t out_dim() const;
    std::size_t param_count() const;

    /// Batched forward on plain values; x is [B, in].
    Tensor forward(const Tensor& x) const;
    /// Forward for a single row.
    std::vector<double> forward(const std::vector<double>& x) const;
};

/// Fan-in-scaled uniform init: W ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), b = 0.
/// dims = {in, h1, ..., out}; hidden layers get `hidden_act`, the final layer
/// is linear. With zero_tail_columns = k > 0 the last k output columns of the
/// final layer (weights and bias) start at zero; Gaussian heads use this so
/// log-std outputs begin exactly at 0.
MlpNet make_mlp(const std::vector<std::size_t>& dims, Activation hidden_act, Rng& rng,
                std::size_t zero_tail_columns = 0);

/// Tape-bound copy of a network's parameters.
struct BoundMlp {
    std::vector<std::pair<ad::Var, ad::Var>> layers; // (W, b) leaves
    std::vector<Activation> acts;
};

BoundMlp bind_mlp(ad::Tape& t, const MlpNet& net);
ad::Var forward_mlp(ad::Tape& t, const BoundMlp& net, ad::Var x);

} // namespace civae::models
