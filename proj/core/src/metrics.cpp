#include "civae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "civae/errors.hpp"
#include "civae/gauss.hpp"
#include "civae/rng.hpp"

namespace civae::metrics {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sab / std::sqrt(saa * sbb);
}

std::vector<double> column(const Tensor& t, std::size_t c) {
    std::vector<double> out(t.shape[0]);
    for (std::size_t r = 0; r < t.shape[0]; ++r) out[r] = t.at(r, c);
    return out;
}

void require_paired(const Tensor& z_true, const Tensor& z_est, std::size_t min_rows,
                    const char* what) {
    if (z_true.rank() != 2 || !z_true.same_shape(z_est))
        throw ConfigError(std::string(what) + ": shapes " + shape_str(z_true.shape) + " vs " +
                          shape_str(z_est.shape) + " must be equal [n, d]");
    if (z_true.shape[0] < min_rows)
        throw ConfigError(std::string(what) + ": needs at least " + std::to_string(min_rows) +
                          " rows");
}

} // namespace

double best_assignment_score(const std::vector<std::vector<double>>& abs_corr) {
    const std::size_t d = abs_corr.size();
    if (d == 0 || d > kMaxAssignDim)
        throw ConfigError("assignment search supports 1 <= d <= " +
                          std::to_string(kMaxAssignDim) + ", got " + std::to_string(d));
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    double best = -1.0;
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < d; ++i) total += abs_corr[i][perm[i]];
        best = std::max(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double mcc(const Tensor& z_true, const Tensor& z_est) {
    require_paired(z_true, z_est, 3, "mcc");
    const std::size_t d = z_true.shape[1];
    std::vector<std::vector<double>> abs_corr(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) {
        const auto ti = column(z_true, i);
        for (std::size_t j = 0; j < d; ++j) {
            const double r = pearson(ti, column(z_est, j));
            if (std::isnan(r)) {
                std::cerr << "[metrics] mcc: zero-variance column, correlation set to 0\n";
                abs_corr[i][j] = 0.0;
            } else {
                abs_corr[i][j] = std::fabs(r);
            }
        }
    }
    return best_assignment_score(abs_corr) / static_cast<double>(d);
}

double cod(const Tensor& z_true, const Tensor& z_est) {
    require_paired(z_true, z_est, 0, "cod");
    const std::size_t n = z_true.shape[0];
    const std::size_t d = z_true.shape[1];
    if (n <= d + 1) throw ConfigError("cod: needs n > d + 1 rows");

    Eigen::MatrixXd A(n, d + 1);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) A(r, c) = z_est.at(r, c);
        A(r, d) = 1.0;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    const bool full_rank = qr.rank() == static_cast<Eigen::Index>(d + 1);
    Eigen::MatrixXd ridge;
    if (!full_rank) {
        std::cerr << "[metrics] cod: rank-deficient design, using ridge 1e-8\n";
        ridge = A.transpose() * A + 1e-8 * Eigen::MatrixXd::Identity(d + 1, d + 1);
    }

    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        Eigen::VectorXd y(n);
        for (std::size_t r = 0; r < n; ++r) y(r) = z_true.at(r, j);
        Eigen::VectorXd w;
        if (full_rank)
            w = qr.solve(y);
        else
            w = ridge.ldlt().solve(A.transpose() * y);
        const double sse = (A * w - y).squaredNorm();
        const double mean = y.mean();
        const double sst = (y.array() - mean).matrix().squaredNorm();
        const double r2 = sst > 0.0 ? 1.0 - sse / sst : 0.0;
        acc += std::clamp(r2, 0.0, 1.0);
    }
    return acc / static_cast<double>(d);
}

double ssw_sst(const Tensor& reps, const std::vector<int>& labels) {
    if (reps.rank() != 2 || reps.shape[0] != labels.size())
        throw ConfigError("ssw_sst: reps must be [n, d] with one label per row");
    const std::size_t n = reps.shape[0];
    const std::size_t d = reps.shape[1];
    std::vector<int> classes(labels);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2) throw ConfigError("ssw_sst: needs at least two classes");

    std::vector<double> total_mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) total_mean[c] += reps.at(r, c);
    for (auto& v : total_mean) v /= static_cast<double>(n);

    double ssw = 0.0, sst = 0.0;
    for (int cls : classes) {
        std::vector<double> cmean(d, 0.0);
        std::size_t cn = 0;
        for (std::size_t r = 0; r < n; ++r)
            if (labels[r] == cls) {
                ++cn;
                for (std::size_t c = 0; c < d; ++c) cmean[c] += reps.at(r, c);
            }
        for (auto& v : cmean) v /= static_cast<double>(cn);
        for (std::size_t r = 0; r < n; ++r)
            if (labels[r] == cls)
                for (std::size_t c = 0; c < d; ++c) {
                    const double dw = reps.at(r, c) - cmean[c];
                    ssw += dw * dw;
                }
    }
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) {
            const double dt = reps.at(r, c) - total_mean[c];
            sst += dt * dt;
        }
    if (sst == 0.0) throw NumericError("ssw_sst: zero total variance");
    return ssw / sst;
}

double mc_loglik(const models::CiModel& model, const std::vector<double>& x,
                 const std::vector<double>& u, std::size_t S, std::uint64_t seed,
                 double* se_out) {
    if (S < 2) throw ConfigError("mc_loglik: needs S >= 2 draws");
    const auto prior_head = model.prior_net.forward(u);
    gauss::DiagGaussian prior(
        std::vector<double>(prior_head.begin(), prior_head.begin() + model.d_z),
        [&] {
            std::vector<double> ls(prior_head.begin() + model.d_z, prior_head.end());
            for (auto& v : ls) v = std::clamp(v, -gauss::kLogStdClamp, gauss::kLogStdClamp);
            return ls;
        }());

    Rng rng(seed);
    Tensor zs = Tensor::zeros({S, model.d_z});
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t j = 0; j < model.d_z; ++j)
            zs.at(s, j) = prior.mean[j] + std::exp(prior.log_std[j]) * rng.normal();
    const Tensor dec = model.decoder_net.forward(zs);

    // Per-draw log densities may underflow to -inf; only the all--inf case is
    // fatal, the shift absorbs the rest.
    std::vector<double> lw(S);
    const double inv2v = 0.5 * std::exp(-2.0 * model.obs_log_std);
    const double dx = static_cast<double>(model.d_x);
    for (std::size_t s = 0; s < S; ++s) {
        double ss = 0.0;
        for (std::size_t j = 0; j < model.d_x; ++j) {
            const double r = x[j] - dec.at(s, j);
            ss += r * r;
        }
        lw[s] = -0.5 * dx * kLogTwoPi - dx * model.obs_log_std - inv2v * ss;
        if (std::isnan(lw[s])) throw NumericError("mc_loglik: NaN summand");
    }
    const double m = *std::max_element(lw.begin(), lw.end());
    if (!std::isfinite(m))
        throw NumericError("mc_loglik: every draw has zero likelihood (max summand " +
                           std::to_string(m) + "); the model places no mass near x");
    double wsum = 0.0, w2sum = 0.0;
    for (double l : lw) {
        const double w = std::exp(l - m);
        wsum += w;
        w2sum += w * w;
    }
    const double wmean = wsum / static_cast<double>(S);
    if (se_out) {
        const double var_w =
            std::max(0.0, w2sum / static_cast<double>(S) - wmean * wmean);
        // Delta method: Var(log barw) ~ Var(w) / (S barw^2).
        *se_out = std::sqrt(var_w / static_cast<double>(S)) / wmean;
    }
    return m + std::log(wmean);
}

double collapse_score_rows(const models::CiModel& model, const synth::LabeledDataset& ds,
                           const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw ConfigError("collapse_score: no rows");
    double acc = 0.0;
    for (std::size_t i : rows) {
        const auto triple = models::posterior_of(model, ds.x_row(i), ds.u_row(i));
        acc += gauss::kl(triple.q_post, triple.prior);
    }
    return acc / static_cast<double>(rows.size());
}

double collapse_score(const models::CiModel& model, const synth::LabeledDataset& ds) {
    std::vector<std::size_t> rows(ds.n());
    std::iota(rows.begin(), rows.end(), 0);
    return collapse_score_rows(model, ds, rows);
}

nlohmann::json MetricReport::to_json() const {
    const auto mv = [](const MetricValue& m) {
        return nlohmann::json{{"value", m.value}, {"se", m.se}, {"n", m.n}};
    };
    return nlohmann::json{{"mcc_post", mv(mcc_post)},   {"mcc_enc", mv(mcc_enc)},
                          {"cod_post", mv(cod_post)},   {"cod_enc", mv(cod_enc)},
                          {"loglik", mv(loglik)},       {"ssw_sst", mv(ssw_sst)},
                          {"collapse", mv(collapse)},   {"has_ground_truth", has_ground_truth}};
}

MetricReport evaluate_model(const models::CiModel& model, const synth::LabeledDataset& ds,
                            const std::vector<std::size_t>& rows, const EvalOptions& opts) {
    if (rows.empty()) throw ConfigError("evaluate_model: no rows selected");
    const std::size_t n = rows.size();
    MetricReport report;
    report.has_ground_truth = ds.has_ground_truth();

    Tensor X = Tensor::zeros({n, ds.d_x()});
    Tensor U = Tensor::zeros({n, ds.d_u()});
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = ds.x_row(rows[i]);
        const auto u = ds.u_row(rows[i]);
        std::copy(x.begin(), x.end(), X.data.begin() + i * ds.d_x());
        std::copy(u.begin(), u.end(), U.data.begin() + i * ds.d_u());
    }
    const Tensor enc_head = models::gaussian_head_batch(model.encoder_net, X, model.d_z);
    const Tensor prior_head = models::gaussian_head_batch(model.prior_net, U, model.d_z);

    Tensor mean_enc = Tensor::zeros({n, model.d_z});
    Tensor mean_post = Tensor::zeros({n, model.d_z});
    std::vector<double> kl_rows(n);
    gauss::DiagGaussian q_enc, prior;
    for (std::size_t i = 0; i < n; ++i) {
        models::head_row_to_gaussian(enc_head, i, q_enc);
        models::head_row_to_gaussian(prior_head, i, prior);
        const auto q_post = gauss::fuse(q_enc, prior);
        for (std::size_t j = 0; j < model.d_z; ++j) {
            mean_enc.at(i, j) = q_enc.mean[j];
            mean_post.at(i, j) = q_post.mean[j];
        }
        kl_rows[i] = gauss::kl(q_post, prior);
    }

    const auto with_se_over = [](const std::vector<double>& vals) {
        MetricValue m;
        m.n = vals.size();
        double acc = 0.0;
        for (double v : vals) acc += v;
        m.value = acc / static_cast<double>(vals.size());
        double ss = 0.0;
        for (double v : vals) ss += (v - m.value) * (v - m.value);
        m.se = vals.size() > 1
                   ? std::sqrt(ss / static_cast<double>(vals.size() - 1) /
                               static_cast<double>(vals.size()))
                   : 0.0;
        return m;
    };

    if (report.has_ground_truth) {
        Tensor Zt = Tensor::zeros({n, ds.d_z()});
        for (std::size_t i = 0; i < n; ++i) {
            const auto z = ds.z_row(rows[i]);
            std::copy(z.begin(), z.end(), Zt.data.begin() + i * ds.d_z());
        }
        report.mcc_post = {mcc(Zt, mean_post), 0.0, n};
        report.mcc_enc = {mcc(Zt, mean_enc), 0.0, n};
        report.cod_post = {cod(Zt, mean_post), 0.0, n};
        report.cod_enc = {cod(Zt, mean_enc), 0.0, n};
    }

    std::vector<double> logliks(n);
    for (std::size_t i = 0; i < n; ++i)
        logliks[i] = mc_loglik(model, ds.x_row(rows[i]), ds.u_row(rows[i]), opts.loglik_draws,
                               mix_seed(opts.seed, 0xeba1000 + rows[i]));
    report.loglik = with_se_over(logliks);
    report.collapse = with_se_over(kl_rows);

    // Class labels for the clustering score: the categorical class when the
    // covariate carries one (two_circles one-hot), equal-width bins of the
    // first covariate otherwise.
    std::vector<int> labels(n);
    if (ds.scheme == "two_circles" && ds.d_u() == 3) {
        for (std::size_t i = 0; i < n; ++i) labels[i] = U.at(i, 1) > 0.5 ? 1 : 2;
    } else {
        double lo = U.at(0, 0), hi = U.at(0, 0);
        for (std::size_t i = 0; i < n; ++i) {
            lo = std::min(lo, U.at(i, 0));
            hi = std::max(hi, U.at(i, 0));
        }
        const double width = (hi - lo) / static_cast<double>(opts.class_bins);
        for (std::size_t i = 0; i < n; ++i) {
            int b = width > 0.0 ? static_cast<int>((U.at(i, 0) - lo) / width) : 0;
            labels[i] = std::clamp(b, 0, static_cast<int>(opts.class_bins) - 1);
        }
    }
    report.ssw_sst = {ssw_sst(mean_post, labels), 0.0, n};
    return report;
}

} // namespace civae::metrics
