#pragma once

#include <string>
#include <utility>
#include <vector>

#include "civae/gauss.hpp"
#include "civae/model.hpp"
#include "civae/tensor.hpp"

namespace civae::objective {

/// ELBO(alpha) split into its parts:
///   total = alpha*(recon_enc - kl_enc) + (1-alpha)*(recon_post - kl_post)
///         + alpha*skew_enc + (1-alpha)*skew_post
/// where skew_enc/skew_post are the skew divergences of the encoder and the
/// fused posterior against their alpha-mixture. Both skew terms are >= 0 in
/// expectation.
struct ElboBreakdown {
    double recon_enc = 0.0;
    double recon_post = 0.0;
    double kl_enc = 0.0;
    double kl_post = 0.0;
    double skew_enc = 0.0;
    double skew_post = 0.0;
    double alpha = 0.0;
    double total = 0.0;
};

/// Per-sample record backing the grid-vs-formula contingency analysis.
struct AlphaRecord {
    double delta_1_0 = 0.0;
    double epsilon = 0.0;
    double alpha_grid = 0.0;
    double alpha_formula = 0.0;
    double elbo_0 = 0.0;
    double elbo_1 = 0.0;
    double elbo_star = 0.0;
};

/// Everything the alpha-scan needs for one sample, computed once under
/// shared noise (the same standard-normal draws reparameterize both the
/// encoder and the fused posterior). Re-evaluating ELBO(alpha) from this
/// cache is O(K) scalar work per alpha.
struct SampleEval {
    gauss::DiagGaussian q_enc, q_post, prior;
    double recon_enc = 0.0, recon_post = 0.0; // MC means of log p(x|z)
    double kl_enc = 0.0, kl_post = 0.0;       // closed-form KL to the prior
    std::vector<double> recon_enc_draws, recon_post_draws;
    // Component log densities at the draws: le_* at encoder draws,
    // lp_* at posterior draws.
    std::vector<double> le_enc, le_post, lp_enc, lp_post;

    double elbo0() const { return recon_post - kl_post; }
    double elbo1() const { return recon_enc - kl_enc; }
    double delta() const { return elbo1() - elbo0(); }
};

/// log(alpha*exp(l_enc) + (1-alpha)*exp(l_post)), stable for any magnitudes.
/// Exact at the endpoints and when both components coincide.
double log_mix(double l_enc, double l_post, double alpha);

/// One sample's cache; noise is [K, d_z].
SampleEval evaluate_sample(const models::CiModel& model, const std::vector<double>& x,
                           const std::vector<double>& u, const Tensor& noise);

/// Cache built from explicitly given distributions (the decoder and
/// observation noise still come from the model).
SampleEval evaluate_with(const models::CiModel& model, const std::vector<double>& x,
                         const gauss::DiagGaussian& q_enc, const gauss::DiagGaussian& q_post,
                         const gauss::DiagGaussian& prior, const Tensor& noise);

/// Batched cache for a whole minibatch; noise is [B*K, d_z] with sample i's
/// draws in rows [i*K, (i+1)*K).
std::vector<SampleEval> evaluate_batch(const models::CiModel& model, const Tensor& X,
                                       const Tensor& U, std::size_t K, const Tensor& noise);

enum class Endpoint { Post, Enc };

/// Monte-Carlo reconstruction minus closed-form KL for one endpoint.
double elbo_endpoint(const models::CiModel& model, const std::vector<double>& x,
                     const std::vector<double>& u, Endpoint which, std::size_t K,
                     const Tensor& noise);

/// Skew divergence D_Skew^a(p || q) = KL(p || (1-a) p + a q), estimated with
/// reparameterized draws from p (noise is [K, d]).
double skew_divergence(const gauss::DiagGaussian& p, const gauss::DiagGaussian& q, double a,
                       const Tensor& noise);

/// ELBO(alpha) assembled from a sample cache. Endpoint alphas reproduce
/// elbo0()/elbo1() exactly.
ElboBreakdown elbo_alpha_from(const SampleEval& eval, double alpha);

/// Convenience: cache + assemble in one go.
ElboBreakdown elbo_alpha(const models::CiModel& model, const std::vector<double>& x,
                         const std::vector<double>& u, double alpha, std::size_t K,
                         const Tensor& noise);

/// Signal-to-noise driven estimate of the epsilon in the alpha* formula.
/// Test statistics are z_j and z_j^2 per coordinate; epsilon is the
/// reciprocal of the best SNR, clamped to [1e-6, 1e6].
double estimate_epsilon(const gauss::DiagGaussian& q_enc, const gauss::DiagGaussian& q_post);

/// Closed-form approximation of the maximizing mixture weight,
/// clamped to [0, 1].
double alpha_star_formula(double epsilon, double delta);

/// Uniform-grid search over alpha with common random numbers; ties break
/// toward the smaller alpha.
std::pair<double, double> alpha_star_from(const SampleEval& eval, std::size_t grid_size);
std::pair<double, double> alpha_star_grid(const models::CiModel& model,
                                          const std::vector<double>& x,
                                          const std::vector<double>& u, std::size_t grid_size,
                                          std::size_t K, const Tensor& noise);

/// Full per-sample analysis record.
AlphaRecord alpha_record_from(const SampleEval& eval, std::size_t grid_size);

/// Lower-bound margin function LB(alpha, epsilon, delta) in closed form,
/// with the x*log|x| -> 0 limit handled at the roots.
double lb_value(double alpha, double epsilon, double delta);

/// (d/dalpha LB, d^2/dalpha^2 LB) in closed form.
std::pair<double, double> lb_derivative(double alpha, double epsilon, double delta);

/// CSV export of alpha records (one row per sample).
void write_alpha_records_csv(const std::string& path, const std::string& config_echo,
                             const std::vector<AlphaRecord>& records);

// ---------------------------------------------------------------------------
// Tape-side builders (the differentiable path used for training).

/// Mean ELBO over a minibatch with per-sample constant mixture weights and
/// K shared draws per sample; noise is [B*K, d_z]. alphas[i] in [0, 1].
ad::Var batch_mean_elbo(ad::Tape& t, const models::BoundModel& bm,
                        const models::CiModel& model, const Tensor& X, const Tensor& U,
                        const std::vector<double>& alphas, std::size_t K,
                        const Tensor& noise);

/// Single-sample ELBO(alpha) with K draws on the tape; returns the scalar
/// node. Used to exercise differentiability end to end at arbitrary K.
ad::Var single_elbo(ad::Tape& t, const models::BoundModel& bm, const models::CiModel& model,
                    const std::vector<double>& x, const std::vector<double>& u, double alpha,
                    const Tensor& noise);

} // namespace civae::objective
