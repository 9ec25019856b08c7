#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace civae {

/// splitmix64 mixing step; used to derive independent stream seeds from a
/// base seed without correlation between streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Deterministic random source: mt19937_64 with explicit uniform and
/// Box-Muller normal transforms. The standard library distributions are
/// implementation-defined, so every transform is spelled out here; two
/// processes with the same seed produce identical draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on (0, 1], 53-bit resolution.
    double uniform();

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi);

    /// Standard normal draw (Box-Muller, pairs cached).
    double normal();

    /// n independent standard normal draws.
    std::vector<double> normal_vec(std::size_t n);

    /// Integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    /// Fisher-Yates shuffle of an index vector.
    void shuffle(std::vector<std::size_t>& idx);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace civae
