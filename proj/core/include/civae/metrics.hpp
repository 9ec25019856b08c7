#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "civae/model.hpp"
#include "civae/synthdata.hpp"
#include "civae/tensor.hpp"

namespace civae::metrics {

/// Absolute-Pearson assignment score for a precomputed |corr| matrix
/// (rows: true coordinates, columns: estimated). Exact search over
/// permutations; d is bounded by kMaxAssignDim.
constexpr std::size_t kMaxAssignDim = 8;
double best_assignment_score(const std::vector<std::vector<double>>& abs_corr);

/// Mean correlation coefficient: mean absolute Pearson correlation between
/// true and estimated coordinates under the best one-to-one assignment.
/// Zero-variance columns contribute zero correlation (with a warning).
double mcc(const Tensor& z_true, const Tensor& z_est);

/// Coefficient of determination: affine least-squares fit from z_est to each
/// true coordinate, mean R^2 clamped to [0, 1]. Rank-deficient designs fall
/// back to a 1e-8 ridge.
double cod(const Tensor& z_true, const Tensor& z_est);

/// Within-cluster over total sum of squares of representations grouped by
/// class labels; needs at least two distinct classes.
double ssw_sst(const Tensor& reps, const std::vector<int>& labels);

/// Monte-Carlo conditional log-likelihood log p(x|u) via log-mean-exp over S
/// draws from the label prior. se_out (optional) receives the delta-method
/// standard error.
double mc_loglik(const models::CiModel& model, const std::vector<double>& x,
                 const std::vector<double>& u, std::size_t S, std::uint64_t seed,
                 double* se_out = nullptr);

/// Mean over samples of KL(q(z|x,u) || p(z|u)); zero exactly at posterior
/// collapse.
double collapse_score(const models::CiModel& model, const synth::LabeledDataset& ds);
double collapse_score_rows(const models::CiModel& model, const synth::LabeledDataset& ds,
                           const std::vector<std::size_t>& rows);

struct MetricValue {
    double value = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

/// Everything reported per (dataset, mode, seed).
struct MetricReport {
    MetricValue mcc_post, mcc_enc, cod_post, cod_enc, loglik, ssw_sst, collapse;
    bool has_ground_truth = false;

    nlohmann::json to_json() const;
};

struct EvalOptions {
    std::size_t loglik_draws = 256; // S
    std::uint64_t seed = 0;
    std::size_t class_bins = 10; // continuous covariates are binned for SSW/SST
};

/// Full report on the selected rows (typically the test split).
MetricReport evaluate_model(const models::CiModel& model, const synth::LabeledDataset& ds,
                            const std::vector<std::size_t>& rows, const EvalOptions& opts);

} // namespace civae::metrics
