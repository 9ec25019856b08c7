#include "civae/train.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "civae/adam.hpp"
#include "civae/errors.hpp"
#include "civae/objective.hpp"
#include "civae/rng.hpp"

namespace civae::models {

namespace {

void gather_rows(const synth::LabeledDataset& ds, const std::vector<std::size_t>& rows,
                 std::size_t begin, std::size_t end, Tensor& X, Tensor& U) {
    const std::size_t b = end - begin;
    X = Tensor::zeros({b, ds.d_x()});
    U = Tensor::zeros({b, ds.d_u()});
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t r = rows[begin + i];
        std::copy(ds.X.data.begin() + r * ds.d_x(), ds.X.data.begin() + (r + 1) * ds.d_x(),
                  X.data.begin() + i * ds.d_x());
        std::copy(ds.U.data.begin() + r * ds.d_u(), ds.U.data.begin() + (r + 1) * ds.d_u(),
                  U.data.begin() + i * ds.d_u());
    }
}

Tensor draw_noise(Rng& rng, std::size_t rows, std::size_t cols) {
    Tensor t = Tensor::zeros({rows, cols});
    for (auto& v : t.data) v = rng.normal();
    return t;
}

std::vector<double> batch_alphas(const CiModel& model, const TrainConfig& config,
                                 const Tensor& X, const Tensor& U, const Tensor& noise) {
    const std::size_t B = X.shape[0];
    std::vector<double> alphas(B, 0.0);
    switch (model.mode) {
        case Mode::IVae: break;
        case Mode::EncoderElbo: alphas.assign(B, 1.0); break;
        case Mode::Ci: {
            const auto evals =
                objective::evaluate_batch(model, X, U, config.k_train, noise);
            for (std::size_t i = 0; i < B; ++i)
                alphas[i] =
                    objective::alpha_star_from(evals[i], config.alpha_grid_train).first;
            break;
        }
    }
    return alphas;
}

void check_model_dims(const CiModel& model, const synth::LabeledDataset& ds,
                      const TrainConfig& config) {
    if (ds.d_x() != config.d_x || ds.d_u() != config.d_u)
        throw ConfigError("train: dataset dims (" + std::to_string(ds.d_x()) + "," +
                          std::to_string(ds.d_u()) + ") do not match config (" +
                          std::to_string(config.d_x) + "," + std::to_string(config.d_u) + ")");
    if (model.d_x != config.d_x || model.d_u != config.d_u || model.d_z != config.d_z)
        throw ConfigError("train: model dims do not match config");
}

} // namespace

double TrainResult::final_val_loss() const {
    return val_loss.empty() ? std::numeric_limits<double>::quiet_NaN() : val_loss.back();
}

double eval_objective(const CiModel& model, const synth::LabeledDataset& ds,
                      const std::vector<std::size_t>& rows, const TrainConfig& config,
                      std::uint64_t noise_seed) {
    if (rows.empty()) throw ConfigError("eval_objective: no rows");
    const std::size_t chunk = 512;
    Rng rng(noise_seed);
    double acc = 0.0;
    Tensor X, U;
    for (std::size_t begin = 0; begin < rows.size(); begin += chunk) {
        const std::size_t end = std::min(begin + chunk, rows.size());
        gather_rows(ds, rows, begin, end, X, U);
        const Tensor noise = draw_noise(rng, (end - begin) * config.k_train, config.d_z);
        const auto evals = objective::evaluate_batch(model, X, U, config.k_train, noise);
        for (std::size_t i = 0; i < evals.size(); ++i) {
            double total = 0.0;
            switch (model.mode) {
                case Mode::IVae: total = evals[i].elbo0(); break;
                case Mode::EncoderElbo: total = evals[i].elbo1(); break;
                case Mode::Ci:
                    total = objective::alpha_star_from(evals[i], config.alpha_grid_train)
                                .second;
                    break;
            }
            acc -= total;
        }
    }
    return acc / static_cast<double>(rows.size());
}

TrainResult train(const CiModel& init, const synth::LabeledDataset& ds,
                  const TrainConfig& config, const ProgressFn& progress) {
    ds.validate();
    check_model_dims(init, ds, config);

    std::vector<std::size_t> train_rows = ds.indices_of(synth::Split::Train);
    if (train_rows.empty()) {
        train_rows.resize(ds.n());
        std::iota(train_rows.begin(), train_rows.end(), 0);
    }
    config.validate(train_rows.size());
    const std::vector<std::size_t> val_rows = ds.indices_of(synth::Split::Val);

    TrainResult result;
    result.model = init;
    CiModel& model = result.model;
    ad::AdamState adam(config.learning_rate, config.weight_decay);
    // The target list must stay stable across steps so Adam's moment buffers
    // line up; the learnable noise scalar gets a persistent holder synced
    // back into the model after each step.
    std::vector<Tensor*> targets = model.params();
    Tensor ols_param = Tensor::scalar(model.obs_log_std);
    if (!model.obs_noise_fixed) targets.push_back(&ols_param);

    std::size_t consecutive_skips = 0;
    Tensor X, U;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(config.seed, 0xe90000 + epoch));
        shuffle_rng.shuffle(train_rows);
        Rng noise_rng(mix_seed(config.seed, 0xba0000 + epoch));

        double epoch_loss = 0.0;
        std::size_t epoch_count = 0;
        for (std::size_t begin = 0; begin < train_rows.size(); begin += config.batch_size) {
            const std::size_t end = std::min(begin + config.batch_size, train_rows.size());
            const std::size_t B = end - begin;
            gather_rows(ds, train_rows, begin, end, X, U);
            const Tensor noise = draw_noise(noise_rng, B * config.k_train, config.d_z);
            try {
                const std::vector<double> alphas = batch_alphas(model, config, X, U, noise);
                ad::Tape tape;
                const BoundModel bm = bind_model(tape, model);
                ad::Var elbo = objective::batch_mean_elbo(tape, bm, model, X, U, alphas,
                                                          config.k_train, noise);
                ad::Var loss = ad::neg(tape, elbo);
                tape.backward(loss);
                std::vector<Tensor> grads;
                grads.reserve(bm.param_leaves.size());
                for (ad::Var leaf : bm.param_leaves) grads.push_back(tape.grad(leaf));
                if (!ad::adam_step(adam, targets, grads)) {
                    ++result.skipped_batches;
                    ++consecutive_skips;
                    std::cerr << "[train] skipped batch at epoch " << epoch
                              << " (non-finite gradients)\n";
                } else {
                    if (!model.obs_noise_fixed) model.obs_log_std = ols_param.data[0];
                    consecutive_skips = 0;
                    epoch_loss += tape.value(loss).data[0] * static_cast<double>(B);
                    epoch_count += B;
                }
            } catch (const NumericError& e) {
                ++result.skipped_batches;
                ++consecutive_skips;
                std::cerr << "[train] skipped batch at epoch " << epoch << ": " << e.what()
                          << "\n";
            }
            if (consecutive_skips >= 3)
                throw NumericError(
                    "training aborted: 3 consecutive batches produced non-finite values "
                    "(epoch " +
                    std::to_string(epoch) + ", " + std::to_string(result.skipped_batches) +
                    " skipped in total); check learning rate and data scaling");
        }
        const double train_nelbo =
            epoch_count > 0 ? epoch_loss / static_cast<double>(epoch_count)
                            : std::numeric_limits<double>::quiet_NaN();
        const double val_nelbo =
            val_rows.empty()
                ? train_nelbo
                : eval_objective(model, ds, val_rows, config, mix_seed(config.seed, 0xa10000 + epoch));
        result.train_loss.push_back(train_nelbo);
        result.val_loss.push_back(val_nelbo);
        if (progress) progress(epoch, train_nelbo, val_nelbo);
    }
    return result;
}

} // namespace civae::models
