#include <doctest.h>

#include <cmath>

#include "civae/errors.hpp"
#include "civae/flows.hpp"
#include "civae/objective.hpp"
#include "civae/rng.hpp"
#include "civae/train.hpp"
#include "oracles.hpp"
#include "toys.hpp"

using namespace civae;
using gauss::DiagGaussian;
using objective::SampleEval;

namespace {

Tensor std_noise(Rng& rng, std::size_t r, std::size_t c) {
    Tensor t = Tensor::zeros({r, c});
    for (auto& v : t.data) v = rng.normal();
    return t;
}

DiagGaussian random_gaussian(std::size_t d, Rng& rng, double mean_scale = 1.0,
                             double ls_scale = 0.4) {
    std::vector<double> mean(d), ls(d);
    for (auto& v : mean) v = mean_scale * rng.normal();
    for (auto& v : ls) v = ls_scale * rng.normal();
    return DiagGaussian(std::move(mean), std::move(ls));
}

double scalar_log_pdf(double z, double mu, double log_std) {
    const double s = std::exp(log_std);
    const double r = (z - mu) / s;
    return -0.5 * std::log(2.0 * M_PI) - log_std - 0.5 * r * r;
}

// Per-draw ELBO(alpha) contribution; its mean over draws recovers the total.
double per_draw_total(const SampleEval& ev, std::size_t k, double alpha) {
    const double e1 = ev.recon_enc_draws[k] - ev.kl_enc;
    const double e0 = ev.recon_post_draws[k] - ev.kl_post;
    const double se =
        ev.le_enc[k] - objective::log_mix(ev.le_enc[k], ev.le_post[k], alpha);
    const double sp =
        ev.lp_post[k] - objective::log_mix(ev.lp_enc[k], ev.lp_post[k], alpha);
    return alpha * e1 + (1.0 - alpha) * e0 + alpha * se + (1.0 - alpha) * sp;
}

// LB by direct numerical integration of the defining integrals.
double lb_quadrature(double alpha, double eps, double delta) {
    const auto num1 = [eps](double t) { return (1.0 - t) / (t * (1.0 - t) + eps); };
    const auto num2 = [eps](double t) { return t / (t * (1.0 - t) + eps); };
    const double i1 = alpha < 1.0 ? oracles::integrate(num1, alpha, 1.0, 1e-12) : 0.0;
    const double i2 = alpha > 0.0 ? oracles::integrate(num2, 0.0, alpha, 1e-12) : 0.0;
    return alpha * delta + alpha * i1 + (1.0 - alpha) * i2;
}

models::CiModel small_trained_model(std::uint64_t seed) {
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
    const auto m0 = models::build_model(cfg, models::Mode::Ci, cfg.seed);
    return models::train(m0, ds, cfg).model;
}

} // namespace

TEST_SUITE("objective") {

TEST_CASE("elbo with q = prior on the identity-decoder toy: KL term vanishes") {
    toys::ConjugateToy toy;
    const auto m = toy.exact_model();
    Rng rng(101);
    const Tensor noise = std_noise(rng, 64, 1);
    const std::vector<double> x{0.3};
    const std::vector<double> u{0.2};
    const auto triple = models::posterior_of(m, x, u);
    // Force the chosen distribution to be the prior itself.
    const auto ev = objective::evaluate_with(m, x, triple.prior, triple.prior, triple.prior,
                                             noise);
    CHECK(ev.kl_post == 0.0);
    CHECK(objective::elbo_alpha_from(ev, 0.0).total == ev.recon_post);
}

TEST_CASE("endpoints coincide when the encoder equals the fused posterior") {
    Rng rng(102);
    toys::ConjugateToy toy;
    const auto m = toy.exact_model();
    const auto g = random_gaussian(1, rng);
    const auto prior = random_gaussian(1, rng);
    const Tensor noise = std_noise(rng, 16, 1);
    const auto ev = objective::evaluate_with(m, {0.1}, g, g, prior, noise);
    CHECK(ev.elbo0() == ev.elbo1());
    const auto [alpha, elbo] = objective::alpha_star_from(ev, 21);
    CHECK(alpha == 0.0);
    CHECK(elbo == ev.elbo0());
    // All grid values tie exactly under shared noise.
    for (int i = 0; i <= 10; ++i)
        CHECK(objective::elbo_alpha_from(ev, i / 10.0).total == ev.elbo0());
}

TEST_CASE("conjugate toy: ELBO at the exact posterior equals log p(x|u) within MC error") {
    toys::ConjugateToy toy;
    const auto m = toy.exact_model();
    Rng rng(103);
    const Tensor noise = std_noise(rng, 4096, 1);
    const std::vector<double> x{0.8};
    const std::vector<double> u{-0.4};
    const auto ev = objective::evaluate_sample(m, x, u, noise);
    const double se = oracles::sd_of(ev.recon_post_draws) / std::sqrt(4096.0);
    CHECK(std::fabs(ev.elbo0() - toy.log_marginal(x[0], u[0])) < 3.0 * se);
}

TEST_CASE("skew divergence endpoints") {
    Rng rng(104);
    const auto p = random_gaussian(2, rng);
    const auto q = random_gaussian(2, rng);
    const Tensor noise = std_noise(rng, 8192, 2);
    SUBCASE("a = 0 is exactly zero") {
        CHECK(objective::skew_divergence(p, q, 0.0, noise) == 0.0);
    }
    SUBCASE("a = 1 recovers KL within MC error") {
        const double est = objective::skew_divergence(p, q, 1.0, noise);
        // Per-draw integrands for the standard error.
        std::vector<double> draws(8192);
        for (std::size_t k = 0; k < 8192; ++k) {
            std::vector<double> z(2);
            for (std::size_t j = 0; j < 2; ++j)
                z[j] = p.mean[j] + std::exp(p.log_std[j]) * noise.at(k, j);
            draws[k] = gauss::log_pdf(p, z) - gauss::log_pdf(q, z);
        }
        const double se = oracles::sd_of(draws) / std::sqrt(8192.0);
        CHECK(std::fabs(est - gauss::kl(p, q)) < 3.0 * se);
    }
    SUBCASE("a outside [0,1] rejected") {
        CHECK_THROWS_AS(objective::skew_divergence(p, q, 1.5, noise), ConfigError);
    }
}

TEST_CASE("skew divergence matches quadrature at a = 0.5") {
    const DiagGaussian p({0.0}, {0.0});
    const DiagGaussian q({3.0}, {0.0});
    Rng rng(105);
    const Tensor noise = std_noise(rng, 8192, 1);
    const double est = objective::skew_divergence(p, q, 0.5, noise);
    const double expect = oracles::integrate(
        [&](double z) {
            const double pd = std::exp(scalar_log_pdf(z, 0.0, 0.0));
            const double qd = std::exp(scalar_log_pdf(z, 3.0, 0.0));
            return pd * std::log(pd / (0.5 * pd + 0.5 * qd));
        },
        -12.0, 15.0);
    std::vector<double> draws(8192);
    for (std::size_t k = 0; k < 8192; ++k) {
        const double z = noise.at(k, 0);
        const double lp = scalar_log_pdf(z, 0.0, 0.0);
        const double lq = scalar_log_pdf(z, 3.0, 0.0);
        draws[k] = lp - std::log(0.5 * std::exp(lp) + 0.5 * std::exp(lq));
    }
    const double se = oracles::sd_of(draws) / std::sqrt(8192.0);
    CHECK(std::fabs(est - expect) < 3.0 * se);
}

TEST_CASE("skew divergence is nonnegative up to MC error") {
    Rng rng(106);
    for (int rep = 0; rep < 20; ++rep) {
        const auto p = random_gaussian(2, rng);
        const auto q = random_gaussian(2, rng);
        const double a = rng.uniform();
        const Tensor noise = std_noise(rng, 2048, 2);
        const double est = objective::skew_divergence(p, q, a, noise);
        std::vector<double> draws(2048);
        for (std::size_t k = 0; k < 2048; ++k) {
            std::vector<double> z(2);
            for (std::size_t j = 0; j < 2; ++j)
                z[j] = p.mean[j] + std::exp(p.log_std[j]) * noise.at(k, j);
            const double lp = gauss::log_pdf(p, z);
            const double lq = gauss::log_pdf(q, z);
            draws[k] = lp - objective::log_mix(lq, lp, a);
        }
        const double se = oracles::sd_of(draws) / std::sqrt(2048.0);
        CHECK(est >= -3.0 * se);
    }
}

TEST_CASE("elbo_alpha endpoint reductions are exact and the breakdown is consistent") {
    const auto m = small_trained_model(1);
    Rng rng(107);
    const auto gt = flows::random_coupling_stack(8, 901);
    auto ds = synth::gen_sine(20, 904, gt, 901);
    const Tensor noise = std_noise(rng, 32, 2);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto ev = objective::evaluate_sample(m, ds.x_row(i), ds.u_row(i), noise);
        CHECK(objective::elbo_alpha_from(ev, 0.0).total == ev.elbo0());
        CHECK(objective::elbo_alpha_from(ev, 1.0).total == ev.elbo1());
        for (double a : {0.25, 0.5, 0.9}) {
            const auto b = objective::elbo_alpha_from(ev, a);
            const double assembled = a * (b.recon_enc - b.kl_enc) +
                                     (1.0 - a) * (b.recon_post - b.kl_post) +
                                     a * b.skew_enc + (1.0 - a) * b.skew_post;
            CHECK(b.total ==
                  doctest::Approx(assembled).epsilon(1e-9));
            // MC skew estimates may dip below zero only within sampling noise.
            std::vector<double> se_draws(ev.le_enc.size()), sp_draws(ev.lp_post.size());
            for (std::size_t k = 0; k < se_draws.size(); ++k) {
                se_draws[k] =
                    ev.le_enc[k] - objective::log_mix(ev.le_enc[k], ev.le_post[k], a);
                sp_draws[k] =
                    ev.lp_post[k] - objective::log_mix(ev.lp_enc[k], ev.lp_post[k], a);
            }
            const double n = static_cast<double>(se_draws.size());
            CHECK(b.skew_enc >= -3.0 * oracles::sd_of(se_draws) / std::sqrt(n));
            CHECK(b.skew_post >= -3.0 * oracles::sd_of(sp_draws) / std::sqrt(n));
        }
    }
}

TEST_CASE("estimate_epsilon") {
    SUBCASE("identical pair clamps to 1e6") {
        const DiagGaussian g({0.5, -1.0}, {0.1, 0.0});
        CHECK(objective::estimate_epsilon(g, g) == 1e6);
    }
    SUBCASE("unit shift example: epsilon = 1/9") {
        const DiagGaussian qe({3.0}, {0.0});
        const DiagGaussian qp({0.0}, {0.0});
        CHECK(objective::estimate_epsilon(qe, qp) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
    }
    SUBCASE("random pair matches first-principles moments") {
        Rng rng(108);
        for (int rep = 0; rep < 20; ++rep) {
            const auto qe = random_gaussian(2, rng);
            const auto qp = random_gaussian(2, rng);
            double best = 0.0;
            for (std::size_t j = 0; j < 2; ++j) {
                const double me = qe.mean[j], ve = std::exp(2.0 * qe.log_std[j]);
                const double mp = qp.mean[j], vp = std::exp(2.0 * qp.log_std[j]);
                // linear statistic
                best = std::max(best, (me - mp) * (me - mp) / std::max(ve, vp));
                // square statistic via raw fourth moments
                const double m2e = me * me + ve;
                const double m2p = mp * mp + vp;
                const double v2e = me * me * me * me + 6.0 * me * me * ve + 3.0 * ve * ve -
                                   m2e * m2e;
                const double v2p = mp * mp * mp * mp + 6.0 * mp * mp * vp + 3.0 * vp * vp -
                                   m2p * m2p;
                best = std::max(best, (m2e - m2p) * (m2e - m2p) / std::max(v2e, v2p));
            }
            const double expect = std::clamp(best > 0.0 ? 1.0 / best : 1e6, 1e-6, 1e6);
            CHECK(objective::estimate_epsilon(qe, qp) ==
                  doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("alpha_star_formula") {
    SUBCASE("delta = 0 gives one half") {
        CHECK(objective::alpha_star_formula(0.3, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(objective::alpha_star_formula(1e-5, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("saturation clamps to 1") {
        CHECK(objective::alpha_star_formula(0.01, 1e6) == 1.0);
        CHECK(objective::alpha_star_formula(0.01, -1e6) == 0.0);
    }
    SUBCASE("extended-precision cross-check") {
        Rng rng(109);
        for (int rep = 0; rep < 50; ++rep) {
            const double eps = std::exp(rng.uniform(std::log(1e-6), std::log(10.0)));
            const double delta = rng.uniform(-6.0, 6.0);
            const long double s = sqrtl(1.0L + 4.0L * static_cast<long double>(eps));
            long double a = (1.0L - s) / 2.0L +
                            s / (1.0L + expl(-s * static_cast<long double>(delta)));
            a = a < 0.0L ? 0.0L : (a > 1.0L ? 1.0L : a);
            CHECK(objective::alpha_star_formula(eps, delta) ==
                  doctest::Approx(static_cast<double>(a)).epsilon(1e-12));
        }
        CHECK(objective::alpha_star_formula(1e-6, 1.0) ==
              doctest::Approx(0.73106).epsilon(2e-5));
    }
}

TEST_CASE("alpha grid search dominates both endpoints under shared noise") {
    const auto m = small_trained_model(2);
    const auto gt = flows::random_coupling_stack(8, 902);
    auto ds = synth::gen_sine(10, 905, gt, 902);
    Rng rng(110);
    for (std::size_t i = 0; i < 10; ++i) {
        const Tensor noise = std_noise(rng, 8, 2);
        const auto ev = objective::evaluate_sample(m, ds.x_row(i), ds.u_row(i), noise);
        const auto [alpha, elbo] = objective::alpha_star_from(ev, 21);
        CHECK(elbo >= std::max(ev.elbo0(), ev.elbo1()));
        CHECK(alpha >= 0.0);
        CHECK(alpha <= 1.0);
    }
}

TEST_CASE("lb_value") {
    SUBCASE("alpha = 0 is exactly zero") {
        Rng rng(111);
        for (int rep = 0; rep < 20; ++rep) {
            const double eps = std::exp(rng.uniform(std::log(1e-5), std::log(5.0)));
            const double delta = rng.uniform(-8.0, 8.0);
            CHECK(objective::lb_value(0.0, eps, delta) == 0.0);
        }
    }
    SUBCASE("nonnegative on the grid for eps=0.25, delta=0") {
        for (int i = 0; i <= 10; ++i) {
            const double a = i / 10.0;
            CHECK(objective::lb_value(a, 0.25, 0.0) >= -1e-12);
            CHECK(lb_quadrature(a, 0.25, 0.0) >= -1e-12);
        }
    }
    SUBCASE("matches quadrature on 50 random points") {
        Rng rng(112);
        for (int rep = 0; rep < 50; ++rep) {
            const double a = rng.uniform();
            const double eps = std::exp(rng.uniform(std::log(1e-4), std::log(10.0)));
            const double delta = rng.uniform(-5.0, 5.0);
            CHECK(objective::lb_value(a, eps, delta) ==
                  doctest::Approx(lb_quadrature(a, eps, delta)).epsilon(1e-9));
            CHECK(std::fabs(objective::lb_value(a, eps, delta) -
                            lb_quadrature(a, eps, delta)) < 1e-8);
        }
    }
}

TEST_CASE("lb_derivative") {
    SUBCASE("second derivative closed form") {
        const auto [f, s] = objective::lb_derivative(0.5, 0.25, 1.0);
        CHECK(s == -2.0);
        Rng rng(113);
        for (int rep = 0; rep < 30; ++rep) {
            const double a = rng.uniform();
            const double eps = std::exp(rng.uniform(std::log(1e-5), std::log(5.0)));
            const auto [f2, s2] = objective::lb_derivative(a, eps, 0.3);
            CHECK(s2 == -1.0 / (a * (1.0 - a) + eps));
            CHECK(s2 < 0.0);
        }
    }
    SUBCASE("first derivative vanishes at the interior formula maximizer") {
        Rng rng(114);
        int interior = 0;
        for (int rep = 0; rep < 100; ++rep) {
            const double eps = std::exp(rng.uniform(std::log(1e-4), std::log(1.0)));
            const double delta = rng.uniform(-3.0, 3.0);
            const double a = objective::alpha_star_formula(eps, delta);
            if (a <= 0.0 || a >= 1.0) continue;
            ++interior;
            CHECK(std::fabs(objective::lb_derivative(a, eps, delta).first) < 1e-10);
        }
        CHECK(interior > 20);
    }
    SUBCASE("first derivative matches finite differences") {
        Rng rng(115);
        for (int rep = 0; rep < 100; ++rep) {
            const double a = rng.uniform(0.02, 0.98);
            const double eps = std::exp(rng.uniform(std::log(1e-3), std::log(5.0)));
            const double delta = rng.uniform(-5.0, 5.0);
            const double fd = oracles::central_diff(
                [&](double av) { return objective::lb_value(av, eps, delta); }, a, 1e-6);
            const double got = objective::lb_derivative(a, eps, delta).first;
            CHECK(std::fabs(got - fd) / std::max(std::fabs(fd), 1e-4) < 1e-4);
        }
    }
}

TEST_CASE("theorem-3 margin: formula alpha keeps LB nonnegative in the small-eps regime") {
    Rng rng(116);
    for (int rep = 0; rep < 200; ++rep) {
        const double eps = std::exp(rng.uniform(std::log(1e-6), std::log(0.05)));
        const double bound = -std::log(eps);
        const double delta = rng.uniform(-bound, bound);
        const double a = objective::alpha_star_formula(eps, delta);
        CHECK(objective::lb_value(a, eps, delta) >= -1e-12);
    }
}

TEST_CASE("concavity: MC second differences stay below 3 standard errors") {
    const auto m = small_trained_model(3);
    const auto gt = flows::random_coupling_stack(8, 903);
    auto ds = synth::gen_sine(10, 906, gt, 903);
    Rng rng(117);
    const std::size_t K = 4096;
    const double h = 0.1;
    for (std::size_t i = 0; i < 5; ++i) {
        const Tensor noise = std_noise(rng, K, 2);
        const auto ev = objective::evaluate_sample(m, ds.x_row(i), ds.u_row(i), noise);
        for (int g = 1; g <= 9; ++g) {
            const double a = g / 10.0;
            std::vector<double> d2(K);
            for (std::size_t k = 0; k < K; ++k)
                d2[k] = per_draw_total(ev, k, a - h) - 2.0 * per_draw_total(ev, k, a) +
                        per_draw_total(ev, k, a + h);
            const double mean_d2 = oracles::mean_of(d2);
            const double se = oracles::sd_of(d2) / std::sqrt(static_cast<double>(K));
            CHECK(mean_d2 <= 3.0 * se);
        }
    }
}

TEST_CASE("tightness: ELBO(alpha) never exceeds log p(x|u) by more than MC error") {
    toys::ConjugateToy toy;
    const auto m = toy.exact_model();
    Rng rng(118);
    const std::size_t K = 4096;
    for (int rep = 0; rep < 5; ++rep) {
        const std::vector<double> u{rng.uniform(-1.0, 1.0)};
        const std::vector<double> x{toy.a * u[0] + toy.b +
                                    std::sqrt(toy.marginal_var()) * rng.normal()};
        const Tensor noise = std_noise(rng, K, 1);
        const auto ev = objective::evaluate_sample(m, x, u, noise);
        const double logp = toy.log_marginal(x[0], u[0]);
        for (int g = 0; g <= 10; ++g) {
            const double a = g / 10.0;
            std::vector<double> totals(K);
            for (std::size_t k = 0; k < K; ++k) totals[k] = per_draw_total(ev, k, a);
            const double se = oracles::sd_of(totals) / std::sqrt(static_cast<double>(K));
            CHECK(objective::elbo_alpha_from(ev, a).total <= logp + 3.0 * se);
        }
    }
}

TEST_CASE("tape assembly matches the plain evaluation path") {
    const auto m = small_trained_model(4);
    const auto gt = flows::random_coupling_stack(8, 904);
    auto ds = synth::gen_sine(6, 907, gt, 904);
    Rng rng(119);
    const std::size_t B = 6;
    Tensor X = Tensor::zeros({B, 8});
    Tensor U = Tensor::zeros({B, 1});
    for (std::size_t i = 0; i < B; ++i) {
        const auto x = ds.x_row(i);
        const auto u = ds.u_row(i);
        std::copy(x.begin(), x.end(), X.data.begin() + i * 8);
        std::copy(u.begin(), u.end(), U.data.begin() + i * 1);
    }
    const std::vector<double> alphas{0.0, 1.0, 0.25, 0.5, 0.75, 0.0};

    SUBCASE("K = 1") {
        const Tensor noise = std_noise(rng, B, 2);
        const auto evals = objective::evaluate_batch(m, X, U, 1, noise);
        double expect = 0.0;
        for (std::size_t i = 0; i < B; ++i)
            expect += objective::elbo_alpha_from(evals[i], alphas[i]).total;
        expect /= static_cast<double>(B);
        ad::Tape t;
        const auto bm = models::bind_model(t, m);
        const double got =
            t.value(objective::batch_mean_elbo(t, bm, m, X, U, alphas, 1, noise)).data[0];
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("K = 4 with per-sample draws") {
        const Tensor noise = std_noise(rng, B * 4, 2);
        const auto evals = objective::evaluate_batch(m, X, U, 4, noise);
        double expect = 0.0;
        for (std::size_t i = 0; i < B; ++i)
            expect += objective::elbo_alpha_from(evals[i], alphas[i]).total;
        expect /= static_cast<double>(B);
        ad::Tape t;
        const auto bm = models::bind_model(t, m);
        const double got =
            t.value(objective::batch_mean_elbo(t, bm, m, X, U, alphas, 4, noise)).data[0];
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("single_elbo equals the per-sample cache") {
        const Tensor noise = std_noise(rng, 16, 2);
        const auto ev = objective::evaluate_sample(m, ds.x_row(0), ds.u_row(0), noise);
        ad::Tape t;
        const auto bm = models::bind_model(t, m);
        const double got =
            t.value(objective::single_elbo(t, bm, m, ds.x_row(0), ds.u_row(0), 0.4, noise))
                .data[0];
        CHECK(got == doctest::Approx(objective::elbo_alpha_from(ev, 0.4).total)
                          .epsilon(1e-12));
    }
}

TEST_CASE("alpha records populate the contingency inputs") {
    const auto m = small_trained_model(5);
    const auto gt = flows::random_coupling_stack(8, 905);
    auto ds = synth::gen_sine(8, 908, gt, 905);
    Rng rng(120);
    const Tensor noise = std_noise(rng, 16, 2);
    const auto ev = objective::evaluate_sample(m, ds.x_row(0), ds.u_row(0), noise);
    const auto rec = objective::alpha_record_from(ev, 101);
    CHECK(rec.delta_1_0 == ev.delta());
    CHECK(rec.epsilon > 0.0);
    CHECK(rec.alpha_grid >= 0.0);
    CHECK(rec.alpha_grid <= 1.0);
    CHECK(rec.alpha_formula >= 0.0);
    CHECK(rec.alpha_formula <= 1.0);
    CHECK(rec.elbo_star >= std::max(rec.elbo_0, rec.elbo_1));
}

} // TEST_SUITE
