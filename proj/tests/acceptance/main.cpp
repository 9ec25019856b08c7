// Acceptance suite: runs every shipped guarantee end to end and prints one
// pass/fail line per criterion. Exit code 0 only when all criteria hold.
//
//   1. alpha grid-vs-formula agreement on a trained sine model
//   2. ci >= ivae ordering on COD/MCC/log-likelihood across schemes and seeds
//   3. collapse-score separation at large observation noise
//   4. ELBO analysis identities (LB closed forms, endpoints, concavity)
//   5. oracle equivalences (quadrature, finite differences, conjugate toy)
//   6. metric sanity
//   7. bit-level reproducibility and dataset conditional moments
//
// Heavy criteria fan independent training runs out to a small thread pool;
// every unit is fully seeded so results do not depend on scheduling.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "civae/flows.hpp"
#include "civae/metrics.hpp"
#include "civae/objective.hpp"
#include "civae/rng.hpp"
#include "civae/synthdata.hpp"
#include "civae/train.hpp"
#include "oracles.hpp"
#include "toys.hpp"

using namespace civae;
using Clock = std::chrono::steady_clock;

namespace {

unsigned g_jobs = std::max(2u, std::thread::hardware_concurrency());

struct Criterion {
    int id;
    std::string name;
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

void run_parallel(std::size_t n_units, const std::function<void(std::size_t)>& fn) {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const unsigned jobs = std::min<std::size_t>(g_jobs, n_units);
    for (unsigned w = 0; w < jobs; ++w)
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n_units; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : workers) t.join();
}

Tensor std_noise(Rng& rng, std::size_t r, std::size_t c) {
    Tensor t = Tensor::zeros({r, c});
    for (auto& v : t.data) v = rng.normal();
    return t;
}

models::TrainConfig scheme_config(const std::string& scheme) {
    models::TrainConfig cfg;
    cfg.d_x = 100;
    cfg.d_z = 2;
    cfg.d_u = scheme == "two_circles" ? 3 : 1;
    cfg.hidden = scheme == "sine" ? std::vector<std::size_t>{60, 60}
                                  : std::vector<std::size_t>{60, 60, 60};
    cfg.epochs = 30;
    cfg.batch_size = 300;
    cfg.learning_rate = 5e-4;
    return cfg;
}

synth::LabeledDataset desk_dataset(const std::string& scheme, std::uint64_t seed,
                                   double obs_noise_std = 1.0, std::size_t n = 5000) {
    const std::uint64_t gt_seed = 4242;
    const auto gt = flows::random_coupling_stack(100, gt_seed);
    auto ds = synth::generate(scheme, n, seed, gt, gt_seed, obs_noise_std);
    synth::split_dataset(ds, {0.8, 0.1, 0.1}, seed);
    return ds;
}

models::TrainResult train_best_of(const synth::LabeledDataset& ds, models::Mode mode,
                                  models::TrainConfig cfg, std::uint64_t seed,
                                  std::size_t restarts) {
    models::TrainResult best;
    for (std::size_t r = 0; r < restarts; ++r) {
        models::TrainConfig rcfg = cfg;
        rcfg.seed = mix_seed(seed, 0x7e5 + r);
        auto result = models::train(models::build_model(rcfg, mode, rcfg.seed), ds, rcfg);
        if (r == 0 || result.final_val_loss() < best.final_val_loss())
            best = std::move(result);
    }
    return best;
}

models::CiModel small_trained_ci(std::uint64_t seed) {
    const auto gt = flows::random_coupling_stack(8, 900 + seed);
    auto ds = synth::gen_sine(400, 901 + seed, gt, 900 + seed);
    synth::split_dataset(ds, {0.8, 0.1, 0.1}, 902 + seed);
    models::TrainConfig cfg;
    cfg.d_x = 8;
    cfg.d_z = 2;
    cfg.d_u = 1;
    cfg.hidden = {16};
    cfg.epochs = 3;
    cfg.batch_size = 64;
    cfg.seed = 903 + seed;
    return models::train(models::build_model(cfg, models::Mode::Ci, cfg.seed), ds, cfg).model;
}

// ---------------------------------------------------------------------------

Criterion criterion1() {
    Criterion c{1, "alpha grid-vs-formula agreement (sine, desk scale)"};
    const auto t0 = Clock::now();
    const auto ds = desk_dataset("sine", 171);
    auto cfg = scheme_config("sine");
    cfg.seed = 172;
    const auto result = train_best_of(ds, models::Mode::Ci, cfg, cfg.seed, 2);

    const auto rows = ds.indices_of(synth::Split::Test);
    c.require(rows.size() >= 500, "test split smaller than 500 samples");
    Rng noise_rng(173);
    std::vector<double> grid_alphas, formula_alphas;
    for (std::size_t i : rows) {
        const Tensor noise = std_noise(noise_rng, 64, 2);
        const auto ev =
            objective::evaluate_sample(result.model, ds.x_row(i), ds.u_row(i), noise);
        const auto rec = objective::alpha_record_from(ev, 1001);
        grid_alphas.push_back(rec.alpha_grid);
        formula_alphas.push_back(rec.alpha_formula);
    }
    const double corr = oracles::pearson(grid_alphas, formula_alphas);
    const double secs =
        std::chrono::duration_cast<std::chrono::seconds>(Clock::now() - t0).count();
    c.require(corr >= 0.95, "correlation " + fmt(corr) + " < 0.95");
    c.require(secs <= 600.0, "runtime " + fmt(secs, 3) + "s exceeds 10 min");
    c.note("correlation " + fmt(corr) + " over " + std::to_string(grid_alphas.size()) +
           " samples, " + fmt(secs, 3) + "s");
    return c;
}

Criterion criterion2() {
    Criterion c{2, "method ordering ci >= ivae (COD/MCC/loglik, 3 schemes x 5 seeds)"};
    const std::vector<std::string> schemes{"sine", "quadratic", "two_circles"};
    constexpr std::size_t n_seeds = 5;

    struct Unit {
        std::string scheme;
        std::size_t seed_idx;
        models::Mode mode;
        double cod = 0.0, mcc = 0.0, loglik = 0.0;
    };
    std::vector<Unit> units;
    for (const auto& scheme : schemes)
        for (std::size_t s = 0; s < n_seeds; ++s)
            for (const auto mode : {models::Mode::IVae, models::Mode::Ci})
                units.push_back({scheme, s, mode});

    run_parallel(units.size(), [&](std::size_t i) {
        Unit& u = units[i];
        const std::uint64_t data_seed = 1000 + 10 * u.seed_idx +
                                        (u.scheme == "sine" ? 0 : u.scheme == "quadratic" ? 1 : 2);
        const auto ds = desk_dataset(u.scheme, data_seed);
        auto cfg = scheme_config(u.scheme);
        cfg.seed = mix_seed(data_seed, 77);
        const auto result = train_best_of(ds, u.mode, cfg, cfg.seed, 2);
        metrics::EvalOptions opts;
        opts.loglik_draws = 256;
        opts.seed = mix_seed(data_seed, 88);
        const auto report = metrics::evaluate_model(result.model, ds,
                                                    ds.indices_of(synth::Split::Test), opts);
        u.cod = report.cod_post.value;
        u.mcc = report.mcc_post.value;
        u.loglik = report.loglik.value;
    });

    for (const auto& scheme : schemes) {
        std::vector<double> d_cod, d_mcc, d_ll;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            const Unit *ivae = nullptr, *ci = nullptr;
            for (const auto& u : units)
                if (u.scheme == scheme && u.seed_idx == s)
                    (u.mode == models::Mode::Ci ? ci : ivae) = &u;
            d_cod.push_back(ci->cod - ivae->cod);
            d_mcc.push_back(ci->mcc - ivae->mcc);
            d_ll.push_back(ci->loglik - ivae->loglik);
        }
        const auto check_metric = [&](const std::vector<double>& d, const std::string& name) {
            const double mean = oracles::mean_of(d);
            const double se = oracles::sd_of(d) / std::sqrt(static_cast<double>(d.size()));
            c.require(mean > se, scheme + " " + name + ": paired diff " + fmt(mean) +
                                     " not > SE " + fmt(se));
            c.note(scheme + " " + name + " +" + fmt(mean) + " (se " + fmt(se) + ")");
        };
        check_metric(d_cod, "cod");
        check_metric(d_mcc, "mcc");
        check_metric(d_ll, "loglik");
    }
    return c;
}

Criterion criterion3() {
    Criterion c{3, "collapse dynamics at gamma = 10 (sine, 5 seeds)"};
    constexpr double gamma = 10.0;
    constexpr std::size_t n_seeds = 5;

    struct Unit {
        std::size_t seed_idx;
        models::Mode mode;
        double collapse = 0.0;
    };
    std::vector<Unit> units;
    for (std::size_t s = 0; s < n_seeds; ++s)
        for (const auto mode : {models::Mode::IVae, models::Mode::Ci})
            units.push_back({s, mode});

    run_parallel(units.size(), [&](std::size_t i) {
        Unit& u = units[i];
        const std::uint64_t data_seed = 3000 + u.seed_idx;
        const auto ds = desk_dataset("sine", data_seed, std::sqrt(gamma));
        auto cfg = scheme_config("sine");
        cfg.seed = mix_seed(data_seed, 31);
        cfg.obs_log_std = 0.5 * std::log(gamma);
        const auto result = train_best_of(ds, u.mode, cfg, cfg.seed, 2);
        u.collapse = metrics::collapse_score_rows(result.model, ds,
                                                  ds.indices_of(synth::Split::Test));
    });

    std::size_t wins = 0;
    double ivae_mean = 0.0, ci_mean = 0.0;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        const Unit *ivae = nullptr, *ci = nullptr;
        for (const auto& u : units)
            if (u.seed_idx == s) (u.mode == models::Mode::Ci ? ci : ivae) = &u;
        if (ivae->collapse < ci->collapse) ++wins;
        ivae_mean += ivae->collapse / n_seeds;
        ci_mean += ci->collapse / n_seeds;
        c.note("seed " + std::to_string(s) + ": ivae " + fmt(ivae->collapse) + " vs ci " +
               fmt(ci->collapse));
    }
    c.require(wins >= 4, "ivae collapse score below ci in only " + std::to_string(wins) +
                             "/5 seeds");
    // Score levels frozen from the first verified runs of this harness.
    c.require(ivae_mean < 0.05, "mean ivae collapse score " + fmt(ivae_mean) + " >= 0.05");
    c.require(ci_mean > 0.06, "mean ci collapse score " + fmt(ci_mean) + " <= 0.06");
    return c;
}

double lb_quadrature(double alpha, double eps, double delta) {
    const auto num1 = [eps](double t) { return (1.0 - t) / (t * (1.0 - t) + eps); };
    const auto num2 = [eps](double t) { return t / (t * (1.0 - t) + eps); };
    const double i1 = alpha < 1.0 ? oracles::integrate(num1, alpha, 1.0, 1e-12) : 0.0;
    const double i2 = alpha > 0.0 ? oracles::integrate(num2, 0.0, alpha, 1e-12) : 0.0;
    return alpha * delta + alpha * i1 + (1.0 - alpha) * i2;
}

Criterion criterion4() {
    Criterion c{4, "ELBO analysis suite (LB identities, endpoints, concavity)"};
    Rng rng(400);

    double worst_q = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const double a = rng.uniform();
        const double eps = std::exp(rng.uniform(std::log(1e-4), std::log(10.0)));
        const double delta = rng.uniform(-5.0, 5.0);
        worst_q = std::max(worst_q, std::fabs(objective::lb_value(a, eps, delta) -
                                              lb_quadrature(a, eps, delta)));
    }
    c.require(worst_q < 1e-8, "LB vs quadrature gap " + fmt(worst_q, 3));
    c.note("LB quadrature gap " + fmt(worst_q, 3));

    double worst_fd = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const double a = rng.uniform(0.02, 0.98);
        const double eps = std::exp(rng.uniform(std::log(1e-3), std::log(5.0)));
        const double delta = rng.uniform(-5.0, 5.0);
        const double fd = oracles::central_diff(
            [&](double av) { return objective::lb_value(av, eps, delta); }, a, 1e-6);
        const double got = objective::lb_derivative(a, eps, delta).first;
        worst_fd = std::max(worst_fd,
                            std::fabs(got - fd) / std::max(std::fabs(fd), 1e-4));
    }
    c.require(worst_fd < 1e-4, "LB first derivative vs FD rel gap " + fmt(worst_fd, 3));

    double worst_stat = 0.0;
    int interior = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const double eps = std::exp(rng.uniform(std::log(1e-4), std::log(1.0)));
        const double delta = rng.uniform(-3.0, 3.0);
        const double a = objective::alpha_star_formula(eps, delta);
        if (a <= 0.0 || a >= 1.0) continue;
        ++interior;
        worst_stat =
            std::max(worst_stat, std::fabs(objective::lb_derivative(a, eps, delta).first));
    }
    c.require(interior > 50, "too few interior formula maximizers");
    c.require(worst_stat < 1e-10, "stationarity residual " + fmt(worst_stat, 3));

    bool second_exact = true;
    for (int rep = 0; rep < 50; ++rep) {
        const double a = rng.uniform();
        const double eps = std::exp(rng.uniform(std::log(1e-5), std::log(5.0)));
        second_exact = second_exact && objective::lb_derivative(a, eps, 0.7).second ==
                                           -1.0 / (a * (1.0 - a) + eps);
    }
    c.require(second_exact, "second derivative not exactly -1/(a(1-a)+eps)");

    // Endpoint identities under shared noise, exact.
    const auto model = small_trained_ci(41);
    const auto gt = flows::random_coupling_stack(8, 941);
    const auto ds = synth::gen_sine(12, 942, gt, 941);
    Rng nrng(401);
    bool endpoints_exact = true;
    for (std::size_t i = 0; i < 12; ++i) {
        const Tensor noise = std_noise(nrng, 16, 2);
        const auto ev = objective::evaluate_sample(model, ds.x_row(i), ds.u_row(i), noise);
        endpoints_exact = endpoints_exact &&
                          objective::elbo_alpha_from(ev, 0.0).total == ev.elbo0() &&
                          objective::elbo_alpha_from(ev, 1.0).total == ev.elbo1();
    }
    c.require(endpoints_exact, "endpoint identities not exact");

    // Concavity at K = 4096: MC second differences below +3 SE.
    const double h = 0.1;
    bool concave_ok = true;
    for (std::size_t i = 0; i < 5 && concave_ok; ++i) {
        const Tensor noise = std_noise(nrng, 4096, 2);
        const auto ev = objective::evaluate_sample(model, ds.x_row(i), ds.u_row(i), noise);
        const auto per_draw = [&](std::size_t k, double alpha) {
            const double e1 = ev.recon_enc_draws[k] - ev.kl_enc;
            const double e0 = ev.recon_post_draws[k] - ev.kl_post;
            const double se =
                ev.le_enc[k] - objective::log_mix(ev.le_enc[k], ev.le_post[k], alpha);
            const double sp =
                ev.lp_post[k] - objective::log_mix(ev.lp_enc[k], ev.lp_post[k], alpha);
            return alpha * e1 + (1.0 - alpha) * e0 + alpha * se + (1.0 - alpha) * sp;
        };
        for (int g = 1; g <= 9; ++g) {
            const double a = g / 10.0;
            std::vector<double> d2(4096);
            for (std::size_t k = 0; k < 4096; ++k)
                d2[k] = per_draw(k, a - h) - 2.0 * per_draw(k, a) + per_draw(k, a + h);
            const double mean = oracles::mean_of(d2);
            const double se = oracles::sd_of(d2) / std::sqrt(4096.0);
            if (mean > 3.0 * se) {
                concave_ok = false;
                c.note("second difference " + fmt(mean) + " > 3 SE " + fmt(se) + " at alpha " +
                       fmt(a, 2));
            }
        }
    }
    c.require(concave_ok, "MC concavity violated");
    return c;
}

Criterion criterion5() {
    Criterion c{5, "oracle equivalences (quadrature, FD, conjugate toy)"};
    Rng rng(500);

    // Closed-form Gaussian KL vs 1-D quadrature.
    const auto slog = [](double z, double mu, double ls) {
        const double s = std::exp(ls);
        const double r = (z - mu) / s;
        return -0.5 * std::log(2.0 * M_PI) - ls - 0.5 * r * r;
    };
    double worst_kl = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        const double m1 = rng.normal(), m2 = rng.normal();
        const double l1 = 0.4 * rng.normal(), l2 = 0.4 * rng.normal();
        const gauss::DiagGaussian p({m1}, {l1}), q({m2}, {l2});
        const double kq = oracles::integrate(
            [&](double z) {
                const double lp = slog(z, m1, l1);
                return std::exp(lp) * (lp - slog(z, m2, l2));
            },
            -40.0, 40.0);
        worst_kl = std::max(worst_kl, std::fabs(gauss::kl(p, q) - kq));
    }
    c.require(worst_kl < 1e-8, "KL vs quadrature gap " + fmt(worst_kl, 3));

    // Fusion vs renormalized product density on a 2-D grid.
    const gauss::DiagGaussian a2({0.3, -0.5}, {0.1, -0.2});
    const gauss::DiagGaussian b2({-0.4, 0.8}, {-0.1, 0.3});
    const auto fused = gauss::fuse(a2, b2);
    const auto prod = [&](double z0, double z1) {
        return std::exp(gauss::log_pdf(a2, {z0, z1}) + gauss::log_pdf(b2, {z0, z1}));
    };
    const double norm = oracles::integrate_2d(prod, fused.mean[0] - 14.0, fused.mean[0] + 14.0,
                                              fused.mean[1] - 14.0, fused.mean[1] + 14.0, 600,
                                              600);
    double worst_fuse = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        const std::vector<double> z{fused.mean[0] + rng.normal(),
                                    fused.mean[1] + rng.normal()};
        worst_fuse = std::max(worst_fuse, std::fabs(std::exp(gauss::log_pdf(fused, z)) -
                                                    prod(z[0], z[1]) / norm));
    }
    c.require(worst_fuse < 1e-6, "fuse vs product-density gap " + fmt(worst_fuse, 3));

    // Skew divergence vs quadrature within MC error.
    {
        const gauss::DiagGaussian p({0.0}, {0.0}), q({3.0}, {0.0});
        const Tensor noise = std_noise(rng, 8192, 1);
        const double est = objective::skew_divergence(p, q, 0.5, noise);
        const double expect = oracles::integrate(
            [&](double z) {
                const double pd = std::exp(slog(z, 0.0, 0.0));
                const double qd = std::exp(slog(z, 3.0, 0.0));
                return pd * std::log(pd / (0.5 * pd + 0.5 * qd));
            },
            -12.0, 15.0);
        std::vector<double> draws(8192);
        for (std::size_t k = 0; k < 8192; ++k) {
            const double z = noise.at(k, 0);
            const double lp = slog(z, 0.0, 0.0), lq = slog(z, 3.0, 0.0);
            draws[k] = lp - std::log(0.5 * std::exp(lp) + 0.5 * std::exp(lq));
        }
        const double se = oracles::sd_of(draws) / std::sqrt(8192.0);
        c.require(std::fabs(est - expect) <= 3.0 * se,
                  "skew vs quadrature gap " + fmt(std::fabs(est - expect), 3) + " > 3 SE " +
                      fmt(se, 3));
    }

    // Autodiff vs finite differences across repo architectures.
    {
        double worst = 0.0;
        for (const auto& dims : std::vector<std::vector<std::size_t>>{
                 {100, 60, 60, 4}, {2, 60, 60, 100}, {3, 60, 60, 60, 4}}) {
            Rng arng(501);
            auto net = models::make_mlp(dims, models::Activation::Tanh, arng);
            Tensor x = std_noise(arng, 2, dims.front());
            const auto loss_of = [&] {
                ad::Tape t;
                const auto bound = models::bind_mlp(t, net);
                return t.value(t.mean(t.square(models::forward_mlp(t, bound, t.constant(x)))))
                    .data[0];
            };
            ad::Tape t;
            const auto bound = models::bind_mlp(t, net);
            t.backward(t.mean(t.square(models::forward_mlp(t, bound, t.constant(x)))));
            Rng pick(502);
            for (int rep = 0; rep < 25; ++rep) {
                const std::size_t li = static_cast<std::size_t>(pick.below(net.layers.size()));
                Tensor* param = pick.below(2) == 0 ? &net.layers[li].weight
                                                   : &net.layers[li].bias;
                const ad::Var leaf = param == &net.layers[li].weight
                                         ? bound.layers[li].first
                                         : bound.layers[li].second;
                const std::size_t j = static_cast<std::size_t>(pick.below(param->numel()));
                const double g = t.grad(leaf).data[j];
                const double fd = oracles::central_diff(
                    [&](double v) {
                        const double keep = param->data[j];
                        param->data[j] = v;
                        const double out = loss_of();
                        param->data[j] = keep;
                        return out;
                    },
                    param->data[j], 1e-5);
                worst = std::max(worst, std::fabs(g - fd) / std::max(std::fabs(fd), 1e-8));
            }
        }
        c.require(worst < 1e-4, "autodiff vs FD rel gap " + fmt(worst, 3));
        c.note("autodiff FD rel gap " + fmt(worst, 3));
    }

    // Conjugate toy: trained iVAE reaches the analytic likelihood; the MC
    // log-likelihood estimator agrees with the closed form.
    {
        toys::ConjugateToy toy;
        const auto ds = toy.dataset(512, 551);
        auto cfg = toy.config();
        cfg.epochs = 500;
        cfg.batch_size = 103;
        cfg.learning_rate = 5e-3;
        cfg.seed = 552;
        const auto result =
            models::train(models::build_model(cfg, models::Mode::IVae, cfg.seed), ds, cfg);
        const auto train_rows = ds.indices_of(synth::Split::Train);
        double analytic = 0.0;
        for (std::size_t i : train_rows)
            analytic -= toy.log_marginal(ds.X.at(i, 0), ds.U.at(i, 0));
        analytic /= static_cast<double>(train_rows.size());
        const double gap = std::fabs(result.train_loss.back() - analytic);
        c.require(gap < 0.05, "conjugate toy nELBO gap " + fmt(gap, 3) + " nats");
        c.note("conjugate nELBO gap " + fmt(gap, 3) + " nats");

        const auto exact = toy.exact_model();
        bool ll_ok = true;
        for (int rep = 0; rep < 5; ++rep) {
            const std::vector<double> u{rng.uniform(-1.0, 1.0)};
            const std::vector<double> x{toy.a * u[0] + toy.b +
                                        std::sqrt(toy.marginal_var()) * rng.normal()};
            double se = 0.0;
            const double est = metrics::mc_loglik(exact, x, u, 4096, 553 + rep, &se);
            ll_ok = ll_ok && std::fabs(est - toy.log_marginal(x[0], u[0])) <= 3.0 * se + 1e-6;
        }
        c.require(ll_ok, "mc_loglik outside 3 SE of the closed form");
    }
    return c;
}

Criterion criterion6() {
    Criterion c{6, "metric sanity (invariances, ranges)"};
    Rng rng(600);

    Tensor z = Tensor::zeros({400, 3});
    for (auto& v : z.data) v = rng.normal();
    Tensor est = Tensor::zeros({400, 3});
    for (std::size_t i = 0; i < 400; ++i) {
        est.at(i, 0) = -2.0 * z.at(i, 2);
        est.at(i, 1) = 0.5 * z.at(i, 0);
        est.at(i, 2) = 3.0 * z.at(i, 1) + 1.0;
    }
    c.require(std::fabs(metrics::mcc(z, est) - 1.0) < 1e-12,
              "MCC != 1 under permutation/sign/rescale");

    Tensor aff = Tensor::zeros({400, 3});
    for (std::size_t i = 0; i < 400; ++i) {
        aff.at(i, 0) = 1.0 * z.at(i, 0) + 0.3 * z.at(i, 1) - 0.2 * z.at(i, 2) + 4.0;
        aff.at(i, 1) = -0.7 * z.at(i, 0) + 1.1 * z.at(i, 1) + 0.5 * z.at(i, 2);
        aff.at(i, 2) = 0.2 * z.at(i, 0) - 0.4 * z.at(i, 1) + 0.9 * z.at(i, 2) - 1.0;
    }
    c.require(std::fabs(metrics::cod(z, aff) - 1.0) < 1e-9,
              "COD != 1 under an invertible affine map");

    Tensor reps = Tensor::zeros({8, 2});
    std::vector<int> labels(8);
    for (std::size_t i = 0; i < 8; ++i) {
        labels[i] = i < 4 ? 0 : 1;
        reps.at(i, 0) = labels[i] == 0 ? 2.0 : -1.0;
        reps.at(i, 1) = labels[i] == 0 ? -3.0 : 5.0;
    }
    c.require(metrics::ssw_sst(reps, labels) == 0.0,
              "SSW/SST != 0 for point-collapsed classes");

    bool ranges_ok = true;
    for (int rep = 0; rep < 10; ++rep) {
        Tensor zt = Tensor::zeros({50, 2});
        Tensor ze = Tensor::zeros({50, 2});
        for (auto& v : zt.data) v = rng.normal();
        for (auto& v : ze.data) v = rng.normal();
        const double m = metrics::mcc(zt, ze);
        const double d = metrics::cod(zt, ze);
        std::vector<int> ls(50);
        for (auto& l : ls) l = static_cast<int>(rng.below(3));
        const double s = metrics::ssw_sst(ze, ls);
        ranges_ok = ranges_ok && m >= 0.0 && m <= 1.0 && d >= 0.0 && d <= 1.0 && s >= 0.0 &&
                    s <= 1.0 + 1e-12;
    }
    c.require(ranges_ok, "metric outputs left their declared ranges on random inputs");
    return c;
}

Criterion criterion7() {
    Criterion c{7, "reproducibility and dataset conditional moments"};

    // gen: bit-identical regeneration.
    {
        const auto a = desk_dataset("two_circles", 700, 1.0, 1000);
        const auto b = desk_dataset("two_circles", 700, 1.0, 1000);
        c.require(a.X.data == b.X.data && a.U.data == b.U.data && a.Z.data == b.Z.data &&
                      a.split == b.split,
                  "regenerated dataset differs");
    }

    // train: bit-identical parameters across two runs.
    {
        const auto gt = flows::random_coupling_stack(12, 701);
        auto ds = synth::gen_sine(400, 702, gt, 701);
        synth::split_dataset(ds, {0.8, 0.1, 0.1}, 703);
        models::TrainConfig cfg;
        cfg.d_x = 12;
        cfg.d_z = 2;
        cfg.d_u = 1;
        cfg.hidden = {8};
        cfg.epochs = 3;
        cfg.batch_size = 100;
        cfg.seed = 704;
        const auto m0 = models::build_model(cfg, models::Mode::Ci, cfg.seed);
        const auto r1 = models::train(m0, ds, cfg);
        const auto r2 = models::train(m0, ds, cfg);
        bool same = r1.train_loss == r2.train_loss;
        const auto p1 = r1.model, p2 = r2.model;
        for (std::size_t l = 0; l < p1.encoder_net.layers.size(); ++l)
            same = same && p1.encoder_net.layers[l].weight.data ==
                               p2.encoder_net.layers[l].weight.data;
        c.require(same, "two identically seeded training runs diverged");
    }

    // Conditional moments of all three schemes at n = 1e5, binned windows.
    {
        const std::uint64_t gt_seed = 4242;
        const auto gt = flows::random_coupling_stack(100, gt_seed);
        const double w = 0.05; // window half-width

        const auto check_scheme = [&](const std::string& scheme,
                                      const std::vector<double>& centers,
                                      const auto& moments_at) {
            const auto ds = synth::generate(scheme, 100000, 705, gt, gt_seed);
            for (const double c0 : centers) {
                std::vector<double> z1, z2;
                for (std::size_t i = 0; i < ds.n(); ++i) {
                    const double u = ds.U.at(i, 0);
                    const bool in_window =
                        scheme == "two_circles"
                            ? (u >= c0 - w && u < c0 + w && ds.U.at(i, 1) > 0.5)
                            : (u >= c0 - w && u < c0 + w);
                    if (in_window) {
                        z1.push_back(ds.Z.at(i, 0));
                        z2.push_back(ds.Z.at(i, 1));
                    }
                }
                if (z1.size() < 100) {
                    c.require(false, scheme + ": window at " + fmt(c0, 2) + " too thin");
                    continue;
                }
                const auto m = moments_at(c0);
                const double n = static_cast<double>(z1.size());
                const double se1 = oracles::sd_of(z1) / std::sqrt(n);
                const double se2 = oracles::sd_of(z2) / std::sqrt(n);
                // 2e-3 absorbs within-window curvature of the mean functions.
                c.require(std::fabs(oracles::mean_of(z1) - m.mean[0]) < 3.0 * se1 + 2e-3,
                          scheme + " mean z1 off at u = " + fmt(c0, 2));
                c.require(std::fabs(oracles::mean_of(z2) - m.mean[1]) < 3.0 * se2 + 2e-3,
                          scheme + " mean z2 off at u = " + fmt(c0, 2));
                const double v1 = oracles::sd_of(z1) * oracles::sd_of(z1);
                const double v2 = oracles::sd_of(z2) * oracles::sd_of(z2);
                const double se_v = m.var * std::sqrt(2.0 / n);
                c.require(std::fabs(v1 - m.var) < 3.0 * se_v + 2e-3,
                          scheme + " var z1 off at u = " + fmt(c0, 2) + " (" + fmt(v1) +
                              " vs " + fmt(m.var) + ")");
                c.require(std::fabs(v2 - m.var) < 3.0 * se_v + 2e-3,
                          scheme + " var z2 off at u = " + fmt(c0, 2));
            }
        };

        check_scheme("sine", {0.8, M_PI / 2.0, 3.0, 4.5, 5.8},
                     [](double u) { return synth::sine_moments(u); });
        check_scheme("quadratic", {-1.2, -0.5, 0.0, 0.7, 1.3},
                     [](double u) { return synth::quadratic_moments(u); });
        check_scheme("two_circles", {-2.5, -1.0, 0.0, 1.2, 2.6},
                     [](double u) { return synth::two_circles_moments(u, 1); });
    }
    return c;
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
        if (std::strcmp(argv[i], "--jobs") == 0 && i + 1 < argc)
            g_jobs = static_cast<unsigned>(std::atoi(argv[++i]));
    }

    using CriterionFn = Criterion (*)();
    const std::vector<CriterionFn> fns{criterion1, criterion2, criterion3, criterion4,
                                       criterion5, criterion6, criterion7};
    bool all_pass = true;
    for (std::size_t i = 0; i < fns.size(); ++i) {
        if (only != 0 && static_cast<int>(i + 1) != only) continue;
        const auto t0 = Clock::now();
        Criterion c = fns[i]();
        const double secs =
            std::chrono::duration<double>(Clock::now() - t0).count();
        all_pass = all_pass && c.pass;
        std::cout << (c.pass ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.name
                  << " (" << fmt(secs, 3) << "s)" << (c.detail.empty() ? "" : " -- " + c.detail)
                  << std::endl;
    }
    std::cout << (all_pass ? "ACCEPTANCE: all criteria passed" : "ACCEPTANCE: FAILURES above")
              << std::endl;
    return all_pass ? 0 : 1;
}
