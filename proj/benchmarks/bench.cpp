#include <benchmark/benchmark.h>

#include "civae/flows.hpp"
#include "civae/model.hpp"
#include "civae/objective.hpp"
#include "civae/rng.hpp"
#include "civae/tape.hpp"

using namespace civae;

namespace {

Tensor randn(Rng& rng, std::size_t r, std::size_t c) {
    Tensor t = Tensor::zeros({r, c});
    for (auto& v : t.data) v = rng.normal();
    return t;
}

models::TrainConfig sine_config() {
    models::TrainConfig c;
    c.d_x = 100;
    c.d_z = 2;
    c.d_u = 1;
    c.hidden = {60, 60};
    return c;
}

void BM_Matmul(benchmark::State& state) {
    const std::size_t n = state.range(0);
    Rng rng(1);
    const Tensor a = randn(rng, n, n);
    const Tensor b = randn(rng, n, n);
    Tensor out;
    for (auto _ : state) {
        matmul_nn(a, b, out);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_BatchElboBackward(benchmark::State& state) {
    const std::size_t B = state.range(0);
    const auto cfg = sine_config();
    const auto model = models::build_model(cfg, models::Mode::Ci, 2);
    Rng rng(3);
    const Tensor X = randn(rng, B, 100);
    const Tensor U = randn(rng, B, 1);
    const Tensor noise = randn(rng, B, 2);
    const std::vector<double> alphas(B, 0.5);
    for (auto _ : state) {
        ad::Tape t;
        const auto bm = models::bind_model(t, model);
        ad::Var loss =
            ad::neg(t, objective::batch_mean_elbo(t, bm, model, X, U, alphas, 1, noise));
        t.backward(loss);
        benchmark::DoNotOptimize(t.grad(bm.param_leaves[0]).data.data());
    }
    state.SetItemsProcessed(state.iterations() * B);
}
BENCHMARK(BM_BatchElboBackward)->Arg(64)->Arg(300);

void BM_AlphaGridScan(benchmark::State& state) {
    const auto cfg = sine_config();
    const auto model = models::build_model(cfg, models::Mode::Ci, 4);
    Rng rng(5);
    const Tensor X = randn(rng, 1, 100);
    const std::vector<double> x(X.data.begin(), X.data.end());
    const std::vector<double> u{0.3};
    const Tensor noise = randn(rng, 64, 2);
    const auto ev = objective::evaluate_sample(model, x, u, noise);
    for (auto _ : state) {
        const auto best = objective::alpha_star_from(ev, 1001);
        benchmark::DoNotOptimize(best);
    }
}
BENCHMARK(BM_AlphaGridScan);

void BM_GaussKl(benchmark::State& state) {
    Rng rng(6);
    const gauss::DiagGaussian p({rng.normal(), rng.normal()}, {0.1, -0.2});
    const gauss::DiagGaussian q({rng.normal(), rng.normal()}, {0.0, 0.3});
    for (auto _ : state) {
        benchmark::DoNotOptimize(gauss::kl(p, q));
    }
}
BENCHMARK(BM_GaussKl);

void BM_FlowForward(benchmark::State& state) {
    const auto f = flows::random_coupling_stack(100, 7);
    Rng rng(8);
    std::vector<double> v(100);
    for (auto& x : v) x = rng.normal();
    for (auto _ : state) {
        benchmark::DoNotOptimize(flows::flow_forward(f, v));
    }
}
BENCHMARK(BM_FlowForward);

} // namespace

BENCHMARK_MAIN();
