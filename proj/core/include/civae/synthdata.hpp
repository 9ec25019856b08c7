#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "civae/flows.hpp"
#include "civae/tensor.hpp"

namespace civae::synth {

enum class Split { Train = 0, Val = 1, Test = 2 };

/// Paired observations and covariates with optional ground-truth latents.
/// Synthetic generators always fill Z; externally ingested data may not.
struct LabeledDataset {
    Tensor X; // [n, d_x]
    Tensor U; // [n, d_u]
    Tensor Z; // [n, d_z], empty when no ground truth
    std::vector<int> split;

    std::string scheme;
    std::uint64_t seed = 0;
    std::uint64_t gt_flow_seed = 0;
    double obs_noise_std = 1.0;
    std::vector<double> fractions = {0.8, 0.1, 0.1};

    std::size_t n() const { return X.shape.empty() ? 0 : X.shape[0]; }
    std::size_t d_x() const { return X.shape.size() == 2 ? X.shape[1] : 0; }
    std::size_t d_u() const { return U.shape.size() == 2 ? U.shape[1] : 0; }
    std::size_t d_z() const { return has_ground_truth() ? Z.shape[1] : 0; }
    bool has_ground_truth() const { return Z.shape.size() == 2 && Z.shape[0] > 0; }

    std::vector<double> x_row(std::size_t i) const;
    std::vector<double> u_row(std::size_t i) const;
    std::vector<double> z_row(std::size_t i) const;
    std::vector<std::size_t> indices_of(Split s) const;
    void validate() const;
};

/// Latent conditional moments of the named scheme at covariate u (the raw
/// scalar angle for two_circles plus the class). Exposed for tests.
struct SchemeMoments {
    std::vector<double> mean;
    double var = 0.0; // per-coordinate, isotropic
};
SchemeMoments sine_moments(double u);
SchemeMoments quadratic_moments(double u);
SchemeMoments two_circles_moments(double u1, int cls);

/// Variance floor applied where the schemes degenerate at covariate
/// boundaries.
constexpr double kVarianceFloor = 1e-6;

/// The generators draw per-row streams derived from (seed, row), so output
/// is identical no matter how rows are scheduled. The ground-truth stack
/// maps padded latents to observation space; obs_noise_std scales the
/// additive Gaussian observation noise (1.0 reproduces the reference
/// simulation setting).
LabeledDataset gen_sine(std::size_t n, std::uint64_t seed, const flows::CouplingStack& gt,
                        std::uint64_t gt_seed, double obs_noise_std = 1.0);
LabeledDataset gen_quadratic(std::size_t n, std::uint64_t seed, const flows::CouplingStack& gt,
                             std::uint64_t gt_seed, double obs_noise_std = 1.0);
LabeledDataset gen_two_circles(std::size_t n, std::uint64_t seed,
                               const flows::CouplingStack& gt, std::uint64_t gt_seed,
                               double obs_noise_std = 1.0);

LabeledDataset generate(const std::string& scheme, std::size_t n, std::uint64_t seed,
                        const flows::CouplingStack& gt, std::uint64_t gt_seed,
                        double obs_noise_std = 1.0);

/// Seeded shuffle then contiguous assignment; fractions must sum to 1.
void split_dataset(LabeledDataset& ds, const std::vector<double>& fractions,
                   std::uint64_t seed);

/// One CSV per field plus a JSON manifest (and the ground-truth flow when
/// given), all under dir.
void save_dataset(const std::string& dir, const LabeledDataset& ds,
                  const flows::CouplingStack* gt_flow);
LabeledDataset load_dataset(const std::string& dir);

} // namespace civae::synth
