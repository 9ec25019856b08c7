#include "civae/mlp.hpp"

#include <cmath>

#include "civae/errors.hpp"

namespace civae::models {

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "tanh") return Activation::Tanh;
    if (s == "leaky_relu") return Activation::LeakyRelu;
    throw ConfigError("mlp: unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::LeakyRelu: return "leaky_relu";
    }
    return "?";
}

std::size_t MlpNet::in_dim() const { return layers.front().weight.shape[0]; }
std::size_t MlpNet::out_dim() const { return layers.back().weight.shape[1]; }

std::size_t MlpNet::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.numel() + l.bias.numel();
    return n;
}

namespace {
void apply_activation(Tensor& h, Activation act) {
    switch (act) {
        case Activation::Identity: break;
        case Activation::Tanh:
            for (auto& v : h.data) v = std::tanh(v);
            break;
        case Activation::LeakyRelu:
            for (auto& v : h.data) v = v > 0.0 ? v : 0.01 * v;
            break;
    }
}
} // namespace

Tensor MlpNet::forward(const Tensor& x) const {
    if (x.rank() != 2 || x.shape[1] != in_dim())
        throw ConfigError("mlp: input shape " + shape_str(x.shape) + " does not match in_dim " +
                          std::to_string(in_dim()));
    Tensor h = x;
    Tensor next;
    for (const auto& l : layers) {
        matmul_nn(h, l.weight, next);
        const std::size_t out = l.weight.shape[1];
        for (std::size_t r = 0; r < next.shape[0]; ++r)
            for (std::size_t c = 0; c < out; ++c) next.at(r, c) += l.bias.data[c];
        apply_activation(next, l.act);
        h = std::move(next);
    }
    return h;
}

std::vector<double> MlpNet::forward(const std::vector<double>& x) const {
    Tensor row({1, x.size()}, x);
    return forward(row).data;
}

MlpNet make_mlp(const std::vector<std::size_t>& dims, Activation hidden_act, Rng& rng,
                std::size_t zero_tail_columns) {
    if (dims.size() < 2) throw ConfigError("mlp: need at least input and output dims");
    MlpNet net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const std::size_t fan_in = dims[i];
        const std::size_t fan_out = dims[i + 1];
        const double limit = std::sqrt(1.0 / static_cast<double>(fan_in));
        MlpLayer layer;
        layer.weight = Tensor::zeros({fan_in, fan_out});
        for (auto& w : layer.weight.data) w = rng.uniform(-limit, limit);
        layer.bias = Tensor::zeros({fan_out});
        const bool last = i + 2 == dims.size();
        layer.act = last ? Activation::Identity : hidden_act;
        if (last && zero_tail_columns > 0) {
            if (zero_tail_columns > fan_out)
                throw ConfigError("mlp: zero_tail_columns exceeds output width");
            for (std::size_t r = 0; r < fan_in; ++r)
                for (std::size_t c = fan_out - zero_tail_columns; c < fan_out; ++c)
                    layer.weight.at(r, c) = 0.0;
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

BoundMlp bind_mlp(ad::Tape& t, const MlpNet& net) {
    BoundMlp bound;
    for (const auto& l : net.layers) {
        bound.layers.emplace_back(t.leaf(l.weight), t.leaf(l.bias));
        bound.acts.push_back(l.act);
    }
    return bound;
}

ad::Var forward_mlp(ad::Tape& t, const BoundMlp& net, ad::Var x) {
    ad::Var h = x;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        h = ad::affine(t, h, net.layers[i].first, net.layers[i].second);
        switch (net.acts[i]) {
            case Activation::Identity: break;
            case Activation::Tanh: h = t.tanh(h); break;
            case Activation::LeakyRelu: h = t.leaky_relu(h); break;
        }
    }
    return h;
}

} // namespace civae::models
