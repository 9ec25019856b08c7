#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "civae/tape.hpp"

namespace civae::gauss {

/// Diagonal-covariance Gaussian over R^d, parameterized by mean and log
/// standard deviation per coordinate. Immutable value type.
struct DiagGaussian {
    std::vector<double> mean;
    std::vector<double> log_std;

    DiagGaussian() = default;
    DiagGaussian(std::vector<double> mean_, std::vector<double> log_std_);

    std::size_t dim() const { return mean.size(); }
    double var(std::size_t j) const;
    static DiagGaussian standard(std::size_t d);
};

/// Exact log density at z.
double log_pdf(const DiagGaussian& g, const std::vector<double>& z);

/// Closed-form KL(p || q) for diagonal Gaussians; nonnegative.
double kl(const DiagGaussian& p, const DiagGaussian& q);

/// Precision-weighted product of densities, renormalized:
/// precision adds, mean is the precision-weighted average.
DiagGaussian fuse(const DiagGaussian& enc, const DiagGaussian& prior);

/// Reparameterized draw mean + std .* noise for standard-normal noise.
std::vector<double> sample(const DiagGaussian& g, const std::vector<double>& noise);

enum class MomentKind { Linear, Square };

/// (mean, variance) of z_j (Linear) or z_j^2 (Square) under g.
std::pair<double, double> coord_moments(const DiagGaussian& g, std::size_t j, MomentKind kind);

// ---------------------------------------------------------------------------
// Tape-side counterparts, operating row-wise on [B, d] batches so gradients
// flow into network parameters through means and log-stds.

/// Rows of Gaussian parameters living on a tape.
struct GaussVars {
    ad::Var mean;    // [B, d]
    ad::Var log_std; // [B, d]
};

/// Bound applied to log-std heads before exponentiation.
constexpr double kLogStdClamp = 7.0;

/// Splits a [B, 2d] network head into (mean, clamped log_std).
GaussVars head_to_gaussian(ad::Tape& t, ad::Var head, std::size_t d);

/// Row-wise log density: [B] vector of log N(z_row; mean_row, std_row).
ad::Var log_pdf_rows(ad::Tape& t, const GaussVars& g, ad::Var z);

/// Row-wise closed-form KL(p_row || q_row): [B] vector.
ad::Var kl_rows(ad::Tape& t, const GaussVars& p, const GaussVars& q);

/// Row-wise precision-weighted fusion.
GaussVars fuse_rows(ad::Tape& t, const GaussVars& enc, const GaussVars& prior);

/// Reparameterized draws, one per row; noise is a [B, d] constant.
ad::Var reparam_rows(ad::Tape& t, const GaussVars& g, const Tensor& noise);

} // namespace civae::gauss
