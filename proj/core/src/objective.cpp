#include "civae/objective.hpp"

#include <algorithm>
#include <cmath>

#include "civae/csvio.hpp"
#include "civae/errors.hpp"

namespace civae::objective {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;
constexpr double kLogZero = -1e9; // finite stand-in for log(0) inside mixtures

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

void require_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ConfigError("objective: alpha " + std::to_string(alpha) + " outside [0, 1]");
}

void require_noise(const Tensor& noise, std::size_t d) {
    if (noise.rank() != 2 || noise.shape[1] != d || noise.shape[0] == 0)
        throw ConfigError("objective: noise shape " + shape_str(noise.shape) +
                          " is not [K, " + std::to_string(d) + "] with K >= 1");
}

double recon_log_prob_row(const std::vector<double>& x, const double* dec_row,
                          double obs_log_std) {
    const double inv2v = 0.5 * std::exp(-2.0 * obs_log_std);
    double ss = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double r = x[j] - dec_row[j];
        ss += r * r;
    }
    const double dx = static_cast<double>(x.size());
    return -0.5 * dx * kLogTwoPi - dx * obs_log_std - inv2v * ss;
}

double xlogx(double x) { return x == 0.0 ? 0.0 : x * std::log(std::fabs(x)); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

double log_mix(double l_enc, double l_post, double alpha) {
    if (alpha <= 0.0) return l_post;
    if (alpha >= 1.0) return l_enc;
    if (l_enc == l_post) return l_enc;
    const double c1 = l_enc + std::log(alpha);
    const double c2 = l_post + std::log1p(-alpha);
    const double m = std::max(c1, c2);
    return m + std::log(std::exp(c1 - m) + std::exp(c2 - m));
}

SampleEval evaluate_with(const models::CiModel& model, const std::vector<double>& x,
                         const gauss::DiagGaussian& q_enc, const gauss::DiagGaussian& q_post,
                         const gauss::DiagGaussian& prior, const Tensor& noise) {
    require_noise(noise, model.d_z);
    const std::size_t K = noise.shape[0];
    const std::size_t dz = model.d_z;

    SampleEval ev;
    ev.q_enc = q_enc;
    ev.q_post = q_post;
    ev.prior = prior;
    ev.kl_enc = gauss::kl(q_enc, prior);
    ev.kl_post = gauss::kl(q_post, prior);

    Tensor z_enc = Tensor::zeros({K, dz});
    Tensor z_post = Tensor::zeros({K, dz});
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < dz; ++j) {
            const double eps = noise.at(k, j);
            z_enc.at(k, j) = q_enc.mean[j] + std::exp(q_enc.log_std[j]) * eps;
            z_post.at(k, j) = q_post.mean[j] + std::exp(q_post.log_std[j]) * eps;
        }
    const Tensor dec_enc = model.decoder_net.forward(z_enc);
    const Tensor dec_post = model.decoder_net.forward(z_post);
    if (!dec_enc.finite() || !dec_post.finite())
        throw NumericError("objective: non-finite decoder output");

    ev.recon_enc_draws.resize(K);
    ev.recon_post_draws.resize(K);
    ev.le_enc.resize(K);
    ev.le_post.resize(K);
    ev.lp_enc.resize(K);
    ev.lp_post.resize(K);
    std::vector<double> zrow(dz);
    for (std::size_t k = 0; k < K; ++k) {
        ev.recon_enc_draws[k] =
            recon_log_prob_row(x, dec_enc.data.data() + k * model.d_x, model.obs_log_std);
        ev.recon_post_draws[k] =
            recon_log_prob_row(x, dec_post.data.data() + k * model.d_x, model.obs_log_std);
        zrow.assign(z_enc.data.begin() + k * dz, z_enc.data.begin() + (k + 1) * dz);
        ev.le_enc[k] = gauss::log_pdf(q_enc, zrow);
        ev.le_post[k] = gauss::log_pdf(q_post, zrow);
        zrow.assign(z_post.data.begin() + k * dz, z_post.data.begin() + (k + 1) * dz);
        ev.lp_enc[k] = gauss::log_pdf(q_enc, zrow);
        ev.lp_post[k] = gauss::log_pdf(q_post, zrow);
    }
    ev.recon_enc = mean_of(ev.recon_enc_draws);
    ev.recon_post = mean_of(ev.recon_post_draws);
    if (!std::isfinite(ev.recon_enc) || !std::isfinite(ev.recon_post) ||
        !std::isfinite(ev.kl_enc) || !std::isfinite(ev.kl_post))
        throw NumericError("objective: non-finite ELBO components (recon_enc=" +
                           std::to_string(ev.recon_enc) + ", recon_post=" +
                           std::to_string(ev.recon_post) + ", kl_enc=" +
                           std::to_string(ev.kl_enc) + ", kl_post=" +
                           std::to_string(ev.kl_post) + ")");
    return ev;
}

SampleEval evaluate_sample(const models::CiModel& model, const std::vector<double>& x,
                           const std::vector<double>& u, const Tensor& noise) {
    const auto triple = models::posterior_of(model, x, u);
    return evaluate_with(model, x, triple.q_enc, triple.q_post, triple.prior, noise);
}

std::vector<SampleEval> evaluate_batch(const models::CiModel& model, const Tensor& X,
                                       const Tensor& U, std::size_t K, const Tensor& noise) {
    const std::size_t B = X.shape[0];
    if (U.shape[0] != B) throw ConfigError("objective: X/U row counts differ");
    if (noise.shape[0] != B * K || noise.shape[1] != model.d_z)
        throw ConfigError("objective: noise shape " + shape_str(noise.shape) +
                          " is not [B*K, d_z]");
    const std::size_t dz = model.d_z;
    const Tensor enc_head = models::gaussian_head_batch(model.encoder_net, X, dz);
    const Tensor prior_head = models::gaussian_head_batch(model.prior_net, U, dz);

    std::vector<SampleEval> evals(B);
    Tensor z_enc = Tensor::zeros({B * K, dz});
    Tensor z_post = Tensor::zeros({B * K, dz});
    for (std::size_t i = 0; i < B; ++i) {
        auto& ev = evals[i];
        models::head_row_to_gaussian(enc_head, i, ev.q_enc);
        models::head_row_to_gaussian(prior_head, i, ev.prior);
        ev.q_post = gauss::fuse(ev.q_enc, ev.prior);
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t r = i * K + k;
            for (std::size_t j = 0; j < dz; ++j) {
                const double eps = noise.at(r, j);
                z_enc.at(r, j) = ev.q_enc.mean[j] + std::exp(ev.q_enc.log_std[j]) * eps;
                z_post.at(r, j) = ev.q_post.mean[j] + std::exp(ev.q_post.log_std[j]) * eps;
            }
        }
    }
    const Tensor dec_enc = model.decoder_net.forward(z_enc);
    const Tensor dec_post = model.decoder_net.forward(z_post);

    std::vector<double> xrow(model.d_x), zrow(dz);
    for (std::size_t i = 0; i < B; ++i) {
        auto& ev = evals[i];
        xrow.assign(X.data.begin() + i * model.d_x, X.data.begin() + (i + 1) * model.d_x);
        ev.kl_enc = gauss::kl(ev.q_enc, ev.prior);
        ev.kl_post = gauss::kl(ev.q_post, ev.prior);
        ev.recon_enc_draws.resize(K);
        ev.recon_post_draws.resize(K);
        ev.le_enc.resize(K);
        ev.le_post.resize(K);
        ev.lp_enc.resize(K);
        ev.lp_post.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t r = i * K + k;
            ev.recon_enc_draws[k] =
                recon_log_prob_row(xrow, dec_enc.data.data() + r * model.d_x, model.obs_log_std);
            ev.recon_post_draws[k] =
                recon_log_prob_row(xrow, dec_post.data.data() + r * model.d_x, model.obs_log_std);
            zrow.assign(z_enc.data.begin() + r * dz, z_enc.data.begin() + (r + 1) * dz);
            ev.le_enc[k] = gauss::log_pdf(ev.q_enc, zrow);
            ev.le_post[k] = gauss::log_pdf(ev.q_post, zrow);
            zrow.assign(z_post.data.begin() + r * dz, z_post.data.begin() + (r + 1) * dz);
            ev.lp_enc[k] = gauss::log_pdf(ev.q_enc, zrow);
            ev.lp_post[k] = gauss::log_pdf(ev.q_post, zrow);
        }
        ev.recon_enc = mean_of(ev.recon_enc_draws);
        ev.recon_post = mean_of(ev.recon_post_draws);
    }
    return evals;
}

double elbo_endpoint(const models::CiModel& model, const std::vector<double>& x,
                     const std::vector<double>& u, Endpoint which, std::size_t K,
                     const Tensor& noise) {
    if (K == 0 || noise.shape[0] != K) throw ConfigError("elbo_endpoint: K must match noise rows");
    const SampleEval ev = evaluate_sample(model, x, u, noise);
    const double out = which == Endpoint::Post ? ev.elbo0() : ev.elbo1();
    if (!std::isfinite(out))
        throw NumericError("elbo_endpoint: non-finite result (recon_post=" +
                           std::to_string(ev.recon_post) + ", kl_post=" +
                           std::to_string(ev.kl_post) + ", recon_enc=" +
                           std::to_string(ev.recon_enc) + ", kl_enc=" +
                           std::to_string(ev.kl_enc) + ")");
    return out;
}

double skew_divergence(const gauss::DiagGaussian& p, const gauss::DiagGaussian& q, double a,
                       const Tensor& noise) {
    require_alpha(a);
    if (p.dim() != q.dim())
        throw ConfigError("skew_divergence: dimension mismatch " + std::to_string(p.dim()) +
                          " vs " + std::to_string(q.dim()));
    require_noise(noise, p.dim());
    const std::size_t K = noise.shape[0];
    double acc = 0.0;
    std::vector<double> eps(p.dim()), z;
    for (std::size_t k = 0; k < K; ++k) {
        eps.assign(noise.data.begin() + k * p.dim(), noise.data.begin() + (k + 1) * p.dim());
        z = gauss::sample(p, eps);
        const double lp = gauss::log_pdf(p, z);
        const double lq = gauss::log_pdf(q, z);
        // mixture (1-a) p + a q: weight (1-a) on the sampling component
        acc += lp - log_mix(lq, lp, a);
    }
    return acc / static_cast<double>(K);
}

ElboBreakdown elbo_alpha_from(const SampleEval& eval, double alpha) {
    require_alpha(alpha);
    ElboBreakdown b;
    b.alpha = alpha;
    b.recon_enc = eval.recon_enc;
    b.recon_post = eval.recon_post;
    b.kl_enc = eval.kl_enc;
    b.kl_post = eval.kl_post;
    const std::size_t K = eval.le_enc.size();
    double se = 0.0, sp = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        se += eval.le_enc[k] - log_mix(eval.le_enc[k], eval.le_post[k], alpha);
        sp += eval.lp_post[k] - log_mix(eval.lp_enc[k], eval.lp_post[k], alpha);
    }
    b.skew_enc = se / static_cast<double>(K);
    b.skew_post = sp / static_cast<double>(K);
    if (alpha == 0.0) {
        b.total = eval.elbo0();
    } else if (alpha == 1.0) {
        b.total = eval.elbo1();
    } else {
        b.total = eval.elbo0() + alpha * eval.delta() + alpha * b.skew_enc +
                  (1.0 - alpha) * b.skew_post;
    }
    return b;
}

ElboBreakdown elbo_alpha(const models::CiModel& model, const std::vector<double>& x,
                         const std::vector<double>& u, double alpha, std::size_t K,
                         const Tensor& noise) {
    if (K == 0 || noise.shape[0] != K) throw ConfigError("elbo_alpha: K must match noise rows");
    return elbo_alpha_from(evaluate_sample(model, x, u, noise), alpha);
}

double estimate_epsilon(const gauss::DiagGaussian& q_enc, const gauss::DiagGaussian& q_post) {
    if (q_enc.dim() != q_post.dim())
        throw ConfigError("estimate_epsilon: dimension mismatch");
    double best_snr = 0.0;
    for (std::size_t j = 0; j < q_enc.dim(); ++j) {
        for (const auto kind : {gauss::MomentKind::Linear, gauss::MomentKind::Square}) {
            const auto [me, ve] = gauss::coord_moments(q_enc, j, kind);
            const auto [mp, vp] = gauss::coord_moments(q_post, j, kind);
            const double gap = me - mp;
            const double denom = std::max(ve, vp);
            if (denom > 0.0) best_snr = std::max(best_snr, gap * gap / denom);
        }
    }
    const double eps = best_snr > 0.0 ? 1.0 / best_snr : 1e6;
    return std::clamp(eps, 1e-6, 1e6);
}

double alpha_star_formula(double epsilon, double delta) {
    if (!(epsilon > 0.0)) throw ConfigError("alpha_star_formula: epsilon must be positive");
    const double s = std::sqrt(1.0 + 4.0 * epsilon);
    const double a = 0.5 * (1.0 - s) + s * sigmoid(s * delta);
    return std::clamp(a, 0.0, 1.0);
}

std::pair<double, double> alpha_star_from(const SampleEval& eval, std::size_t grid_size) {
    if (grid_size < 2) throw ConfigError("alpha_star_grid: grid_size must be >= 2");
    double best_alpha = 0.0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid_size; ++i) {
        const double a = static_cast<double>(i) / static_cast<double>(grid_size - 1);
        const double v = elbo_alpha_from(eval, a).total;
        if (v > best) {
            best = v;
            best_alpha = a;
        }
    }
    return {best_alpha, best};
}

std::pair<double, double> alpha_star_grid(const models::CiModel& model,
                                          const std::vector<double>& x,
                                          const std::vector<double>& u, std::size_t grid_size,
                                          std::size_t K, const Tensor& noise) {
    if (K == 0 || noise.shape[0] != K)
        throw ConfigError("alpha_star_grid: K must match noise rows");
    return alpha_star_from(evaluate_sample(model, x, u, noise), grid_size);
}

AlphaRecord alpha_record_from(const SampleEval& eval, std::size_t grid_size) {
    AlphaRecord rec;
    rec.elbo_0 = eval.elbo0();
    rec.elbo_1 = eval.elbo1();
    rec.delta_1_0 = eval.delta();
    rec.epsilon = estimate_epsilon(eval.q_enc, eval.q_post);
    rec.alpha_formula = alpha_star_formula(rec.epsilon, rec.delta_1_0);
    const auto [a, v] = alpha_star_from(eval, grid_size);
    rec.alpha_grid = a;
    rec.elbo_star = v;
    return rec;
}

double lb_value(double alpha, double epsilon, double delta) {
    require_alpha(alpha);
    if (!(epsilon > 0.0)) throw ConfigError("lb_value: epsilon must be positive");
    // Exact endpoint identities: the bracket below cancels algebraically at
    // both ends (at alpha=1 via 1-tp = tm).
    if (alpha == 0.0) return 0.0;
    if (alpha == 1.0) return delta;
    const double s = std::sqrt(1.0 + 4.0 * epsilon);
    const double tp = 0.5 * (1.0 + s);
    const double tm = 0.5 * (1.0 - s);
    return alpha * delta +
           (xlogx(alpha - tp) - xlogx(alpha - tm) + xlogx(tp) - xlogx(tm)) / s;
}

std::pair<double, double> lb_derivative(double alpha, double epsilon, double delta) {
    require_alpha(alpha);
    if (!(epsilon > 0.0)) throw ConfigError("lb_derivative: epsilon must be positive");
    const double s = std::sqrt(1.0 + 4.0 * epsilon);
    const double tp = 0.5 * (1.0 + s);
    const double tm = 0.5 * (1.0 - s);
    const double first = delta + std::log(std::fabs((alpha - tp) / (alpha - tm))) / s;
    const double second = -1.0 / (alpha * (1.0 - alpha) + epsilon);
    return {first, second};
}

void write_alpha_records_csv(const std::string& path, const std::string& config_echo,
                             const std::vector<AlphaRecord>& records) {
    std::vector<std::vector<double>> rows;
    rows.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        rows.push_back({static_cast<double>(i), r.delta_1_0, r.epsilon, r.alpha_grid,
                        r.alpha_formula, r.elbo_0, r.elbo_1, r.elbo_star});
    }
    io::write_csv(path, config_echo,
                  "sample_id,delta_1_0,epsilon,alpha_grid,alpha_formula,elbo_0,elbo_1,elbo_star",
                  rows);
}

// ---------------------------------------------------------------------------
// Tape-side assembly.

namespace {

ad::Var recon_rows_tape(ad::Tape& t, ad::Var x_const, ad::Var xhat, ad::Var obs_log_std,
                        std::size_t d_x) {
    const std::size_t B = t.value(xhat).shape[0];
    ad::Var diff = t.sub(x_const, xhat);
    ad::Var ss = t.sum(t.square(diff), 1); // [B]
    ad::Var inv2v = t.exp(ad::scale(t, obs_log_std, -2.0));
    ad::Var quad = ad::scale(t, t.mul(ss, t.broadcast(inv2v, {B})), -0.5);
    const double dx = static_cast<double>(d_x);
    ad::Var c = ad::add_scalar(t, ad::scale(t, obs_log_std, -dx), -0.5 * dx * kLogTwoPi);
    return t.add(quad, t.broadcast(c, {B}));
}

ad::Var log_mix_rows(ad::Tape& t, ad::Var l_enc, ad::Var l_post,
                     const std::vector<double>& alphas) {
    const std::size_t B = alphas.size();
    Tensor la = Tensor::zeros({B});
    Tensor lb = Tensor::zeros({B});
    for (std::size_t i = 0; i < B; ++i) {
        la.data[i] = alphas[i] > 0.0 ? std::log(alphas[i]) : kLogZero;
        lb.data[i] = alphas[i] < 1.0 ? std::log1p(-alphas[i]) : kLogZero;
    }
    ad::Var c1 = t.add(l_enc, t.constant(std::move(la)));
    ad::Var c2 = t.add(l_post, t.constant(std::move(lb)));
    Tensor m = Tensor::zeros({B});
    for (std::size_t i = 0; i < B; ++i)
        m.data[i] = std::max(t.value(c1).data[i], t.value(c2).data[i]);
    ad::Var mc = t.constant(std::move(m));
    ad::Var e1 = t.exp(t.sub(c1, mc));
    ad::Var e2 = t.exp(t.sub(c2, mc));
    return t.add(mc, t.log(t.add(e1, e2)));
}

struct RowTerms {
    ad::Var elbo0; // [B]
    ad::Var elbo1;
    ad::Var skew_enc;
    ad::Var skew_post;
};

} // namespace

ad::Var batch_mean_elbo(ad::Tape& t, const models::BoundModel& bm,
                        const models::CiModel& model, const Tensor& X, const Tensor& U,
                        const std::vector<double>& alphas, std::size_t K,
                        const Tensor& noise) {
    const std::size_t B = X.shape[0];
    if (alphas.size() != B || U.shape[0] != B)
        throw ConfigError("batch_mean_elbo: batch sizes disagree");
    if (K == 0 || noise.shape[0] != B * K || noise.shape[1] != model.d_z)
        throw ConfigError("batch_mean_elbo: noise must be [B*K, d_z]");
    for (double a : alphas) require_alpha(a);

    bool all_post = true, all_enc = true;
    for (double a : alphas) {
        all_post = all_post && a == 0.0;
        all_enc = all_enc && a == 1.0;
    }

    // X replicated K times per row for the reconstruction terms.
    ad::Var xrep{-1};
    if (K == 1) {
        xrep = t.constant(X);
    } else {
        Tensor xr = Tensor::zeros({B * K, model.d_x});
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t k = 0; k < K; ++k)
                std::copy(X.data.begin() + i * model.d_x, X.data.begin() + (i + 1) * model.d_x,
                          xr.data.begin() + (i * K + k) * model.d_x);
        xrep = t.constant(std::move(xr));
    }

    ad::Var xc = t.constant(X);
    ad::Var uc = t.constant(U);
    gauss::GaussVars q_enc =
        gauss::head_to_gaussian(t, models::forward_mlp(t, bm.encoder, xc), model.d_z);
    gauss::GaussVars prior =
        gauss::head_to_gaussian(t, models::forward_mlp(t, bm.prior, uc), model.d_z);
    gauss::GaussVars q_post = gauss::fuse_rows(t, q_enc, prior);

    // Row replication / per-sample averaging as constant matmuls.
    ad::Var rep_mat{-1}, avg_mat{-1};
    if (K > 1) {
        Tensor R = Tensor::zeros({B * K, B});
        Tensor A = Tensor::zeros({B, B * K});
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t k = 0; k < K; ++k) {
                R.at(i * K + k, i) = 1.0;
                A.at(i, i * K + k) = 1.0 / static_cast<double>(K);
            }
        rep_mat = t.constant(std::move(R));
        avg_mat = t.constant(std::move(A));
    }
    const auto tile = [&](const gauss::GaussVars& g) {
        if (K == 1) return g;
        gauss::GaussVars out;
        out.mean = t.matmul(rep_mat, g.mean);
        out.log_std = t.matmul(rep_mat, g.log_std);
        return out;
    };
    // [B*K] draw-wise values -> [B] per-sample means.
    const auto per_sample = [&](ad::Var draws) {
        if (K == 1) return draws;
        ad::Var col = t.reshape(draws, {B * K, 1});
        return t.reshape(t.matmul(avg_mat, col), {B});
    };
    const auto recon_of = [&](const gauss::GaussVars& g) {
        ad::Var z = gauss::reparam_rows(t, tile(g), noise);
        ad::Var r = recon_rows_tape(t, xrep, models::forward_mlp(t, bm.decoder, z),
                                    bm.obs_log_std, model.d_x);
        return std::make_pair(per_sample(r), z);
    };

    ad::Var rows{-1};
    if (all_post) {
        rows = t.sub(recon_of(q_post).first, gauss::kl_rows(t, q_post, prior));
    } else if (all_enc) {
        rows = t.sub(recon_of(q_enc).first, gauss::kl_rows(t, q_enc, prior));
    } else {
        auto [recon_e, z_e] = recon_of(q_enc);
        auto [recon_p, z_p] = recon_of(q_post);
        ad::Var elbo1 = t.sub(recon_e, gauss::kl_rows(t, q_enc, prior));
        ad::Var elbo0 = t.sub(recon_p, gauss::kl_rows(t, q_post, prior));
        const gauss::GaussVars enc_k = tile(q_enc);
        const gauss::GaussVars post_k = tile(q_post);
        ad::Var le_enc = gauss::log_pdf_rows(t, enc_k, z_e);
        ad::Var le_post = gauss::log_pdf_rows(t, post_k, z_e);
        ad::Var lp_enc = gauss::log_pdf_rows(t, enc_k, z_p);
        ad::Var lp_post = gauss::log_pdf_rows(t, post_k, z_p);
        std::vector<double> alphas_k;
        if (K == 1) {
            alphas_k = alphas;
        } else {
            alphas_k.reserve(B * K);
            for (std::size_t i = 0; i < B; ++i)
                alphas_k.insert(alphas_k.end(), K, alphas[i]);
        }
        ad::Var skew_e =
            per_sample(t.sub(le_enc, log_mix_rows(t, le_enc, le_post, alphas_k)));
        ad::Var skew_p =
            per_sample(t.sub(lp_post, log_mix_rows(t, lp_enc, lp_post, alphas_k)));

        Tensor av = Tensor::zeros({B});
        Tensor av1 = Tensor::zeros({B});
        for (std::size_t i = 0; i < B; ++i) {
            av.data[i] = alphas[i];
            av1.data[i] = 1.0 - alphas[i];
        }
        ad::Var a = t.constant(std::move(av));
        ad::Var a1 = t.constant(std::move(av1));
        rows = t.add(t.add(t.mul(a, elbo1), t.mul(a1, elbo0)),
                     t.add(t.mul(a, skew_e), t.mul(a1, skew_p)));
    }
    return t.mean(rows, -1);
}

ad::Var single_elbo(ad::Tape& t, const models::BoundModel& bm, const models::CiModel& model,
                    const std::vector<double>& x, const std::vector<double>& u, double alpha,
                    const Tensor& noise) {
    require_noise(noise, model.d_z);
    const Tensor X({1, model.d_x}, x);
    const Tensor U({1, model.d_u}, u);
    return batch_mean_elbo(t, bm, model, X, U, {alpha}, noise.shape[0], noise);
}

} // namespace civae::objective
