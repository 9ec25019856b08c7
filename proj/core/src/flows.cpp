#include "civae/flows.hpp"

#include <cmath>
#include <string>

#include "civae/errors.hpp"
#include "civae/rng.hpp"
#include "civae/serialize.hpp"

namespace civae::flows {

namespace {

void split_sizes(std::size_t dim, int parity, std::size_t& trans, std::size_t& cond) {
    const std::size_t lo = dim / 2;
    trans = parity == 0 ? lo : dim - lo;
    cond = dim - trans;
}

// Views of the transformed and conditioning halves for a block.
void gather(const std::vector<double>& v, int parity, std::vector<double>& trans,
            std::vector<double>& cond) {
    const std::size_t lo = v.size() / 2;
    if (parity == 0) {
        trans.assign(v.begin(), v.begin() + lo);
        cond.assign(v.begin() + lo, v.end());
    } else {
        trans.assign(v.begin() + lo, v.end());
        cond.assign(v.begin(), v.begin() + lo);
    }
}

void scatter(std::vector<double>& v, int parity, const std::vector<double>& trans) {
    const std::size_t lo = v.size() / 2;
    if (parity == 0) {
        std::copy(trans.begin(), trans.end(), v.begin());
    } else {
        std::copy(trans.begin(), trans.end(), v.begin() + lo);
    }
}

std::vector<double> bounded_log_scale(const models::MlpNet& net,
                                      const std::vector<double>& cond) {
    std::vector<double> s = net.forward(cond);
    for (auto& x : s) x = 2.0 * std::tanh(x);
    return s;
}

} // namespace

CouplingStack random_coupling_stack(std::size_t dim, std::uint64_t seed, std::size_t n_blocks,
                                    std::size_t hidden) {
    if (dim < 2) throw ConfigError("flows: coupling stack needs dim >= 2");
    CouplingStack f;
    f.dim = dim;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        CouplingBlock block;
        block.parity = static_cast<int>(b % 2);
        std::size_t trans, cond;
        split_sizes(dim, block.parity, trans, cond);
        Rng rs(mix_seed(seed, 2 * b));
        Rng rt(mix_seed(seed, 2 * b + 1));
        block.scale_net = models::make_mlp({cond, hidden, trans}, models::Activation::Tanh, rs);
        block.shift_net = models::make_mlp({cond, hidden, trans}, models::Activation::Tanh, rt);
        f.blocks.push_back(std::move(block));
    }
    return f;
}

std::vector<double> flow_forward(const CouplingStack& f, const std::vector<double>& v) {
    if (v.size() != f.dim)
        throw ConfigError("flows: input dim " + std::to_string(v.size()) +
                          " does not match stack dim " + std::to_string(f.dim));
    std::vector<double> out = v, trans, cond;
    for (const auto& block : f.blocks) {
        gather(out, block.parity, trans, cond);
        const std::vector<double> s = bounded_log_scale(block.scale_net, cond);
        const std::vector<double> t = block.shift_net.forward(cond);
        for (std::size_t j = 0; j < trans.size(); ++j)
            trans[j] = trans[j] * std::exp(s[j]) + t[j];
        scatter(out, block.parity, trans);
    }
    return out;
}

std::vector<double> flow_inverse(const CouplingStack& f, const std::vector<double>& x) {
    if (x.size() != f.dim)
        throw ConfigError("flows: input dim " + std::to_string(x.size()) +
                          " does not match stack dim " + std::to_string(f.dim));
    std::vector<double> out = x, trans, cond;
    for (auto it = f.blocks.rbegin(); it != f.blocks.rend(); ++it) {
        gather(out, it->parity, trans, cond);
        const std::vector<double> s = bounded_log_scale(it->scale_net, cond);
        const std::vector<double> t = it->shift_net.forward(cond);
        for (std::size_t j = 0; j < trans.size(); ++j)
            trans[j] = (trans[j] - t[j]) * std::exp(-s[j]);
        scatter(out, it->parity, trans);
    }
    return out;
}

std::vector<double> pad_constants(std::size_t d_z, std::size_t d_x, std::uint64_t seed) {
    if (d_z > d_x)
        throw ConfigError("flows: latent dim " + std::to_string(d_z) +
                          " exceeds observation dim " + std::to_string(d_x));
    Rng rng(mix_seed(seed, 0x70ad));
    std::vector<double> pad(d_x - d_z);
    for (auto& c : pad) c = 0.01 * (2.0 * rng.uniform() - 1.0);
    return pad;
}

std::vector<double> pad_latent(const std::vector<double>& z, std::size_t d_x,
                               std::uint64_t seed) {
    const std::vector<double> pad = pad_constants(z.size(), d_x, seed);
    std::vector<double> out(d_x);
    std::copy(z.begin(), z.end(), out.begin());
    std::copy(pad.begin(), pad.end(), out.begin() + z.size());
    return out;
}

nlohmann::json flow_to_json(const CouplingStack& f) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : f.blocks) {
        blocks.push_back(nlohmann::json{{"parity", b.parity},
                                        {"scale_net", mlp_to_json(b.scale_net)},
                                        {"shift_net", mlp_to_json(b.shift_net)}});
    }
    return nlohmann::json{
        {"format_version", 1}, {"kind", "civae_flow"}, {"dim", f.dim}, {"blocks", blocks}};
}

CouplingStack flow_from_json(const nlohmann::json& j) {
    CouplingStack f;
    try {
        if (j.at("kind").get<std::string>() != "civae_flow")
            throw DataError("not a flow record");
        f.dim = j.at("dim").get<std::size_t>();
        for (const auto& bj : j.at("blocks")) {
            CouplingBlock b;
            b.parity = bj.at("parity").get<int>();
            b.scale_net = mlp_from_json(bj.at("scale_net"));
            b.shift_net = mlp_from_json(bj.at("shift_net"));
            f.blocks.push_back(std::move(b));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed flow record: ") + e.what());
    }
    return f;
}

} // namespace civae::flows
