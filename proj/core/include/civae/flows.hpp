#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "civae/mlp.hpp"

namespace civae::flows {

/// One affine coupling block. parity selects which half of the vector is
/// transformed; the other half conditions the scale/shift networks and
/// passes through unchanged. Log-scales are bounded by 2*tanh, so the block
/// is invertible in closed form for any network weights.
struct CouplingBlock {
    int parity = 0; // 0: transform [0, d/2), condition on the rest; 1: swapped
    models::MlpNet scale_net;
    models::MlpNet shift_net;
};

/// Stack of coupling blocks acting on R^dim; immutable after construction.
struct CouplingStack {
    std::size_t dim = 0;
    std::vector<CouplingBlock> blocks;
};

/// Ground-truth mixing stack: 4 blocks with alternating half-masks and
/// Dense(32)-Tanh-Dense(half) scale/shift networks, seeded init.
CouplingStack random_coupling_stack(std::size_t dim, std::uint64_t seed,
                                    std::size_t n_blocks = 4, std::size_t hidden = 32);

std::vector<double> flow_forward(const CouplingStack& f, const std::vector<double>& v);
std::vector<double> flow_inverse(const CouplingStack& f, const std::vector<double>& x);

/// Fixed small-amplitude constants (|c| <= 0.01) appended after the latent
/// coordinates; deterministic per (seed, gap).
std::vector<double> pad_constants(std::size_t d_z, std::size_t d_x, std::uint64_t seed);

/// Embeds z into R^d_x: z in the leading coordinates, seed-derived constants
/// in the rest.
std::vector<double> pad_latent(const std::vector<double>& z, std::size_t d_x,
                               std::uint64_t seed);

nlohmann::json flow_to_json(const CouplingStack& f);
CouplingStack flow_from_json(const nlohmann::json& j);

} // namespace civae::flows
