#pragma once

#include <functional>
#include <string>
#include <vector>

#include "civae/model.hpp"
#include "civae/synthdata.hpp"

namespace civae::models {

struct TrainResult {
    CiModel model;
    std::vector<double> train_loss; // epoch-mean negative ELBO on the train split
    std::vector<double> val_loss;   // negative ELBO on the validation split
    std::size_t skipped_batches = 0;

    double final_val_loss() const;
};

using ProgressFn =
    std::function<void(std::size_t epoch, double train_nelbo, double val_nelbo)>;

/// One full optimization run. Per batch: mixture weights per sample follow
/// the mode (ci: samplewise grid argmax; ivae: 0; encoder_elbo: 1), then one
/// Adam ascent step on the mean ELBO at those weights. Batches with
/// non-finite losses are skipped and logged; three consecutive skips abort.
/// Single-threaded and fully determined by (init, dataset, config).
TrainResult train(const CiModel& init, const synth::LabeledDataset& ds,
                  const TrainConfig& config, const ProgressFn& progress = nullptr);

/// Negative mean ELBO of the mode objective on the given rows, with
/// samplewise alpha* in ci mode; seeded noise, deterministic.
double eval_objective(const CiModel& model, const synth::LabeledDataset& ds,
                      const std::vector<std::size_t>& rows, const TrainConfig& config,
                      std::uint64_t noise_seed);

} // namespace civae::models
