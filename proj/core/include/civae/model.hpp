#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "civae/gauss.hpp"
#include "civae/mlp.hpp"

namespace civae::models {

enum class Mode { IVae, EncoderElbo, Ci };

Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

/// Training and architecture knobs. Defaults are the desk-scale settings;
/// the reference full-scale run uses epochs=100, batch_size=300, lr=5e-4.
struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 300;
    double learning_rate = 5e-4;
    double weight_decay = 0.0; // decoupled AdamW-style decay, off by default
    std::uint64_t seed = 1;
    std::size_t k_train = 1;           // MC draws per sample during training
    std::size_t alpha_grid_train = 21; // per-batch alpha* grid resolution
    bool obs_noise_fixed = true;
    double obs_log_std = 0.0;
    std::size_t d_z = 2;
    std::size_t d_x = 100;
    std::size_t d_u = 1;
    std::vector<std::size_t> hidden = {60, 60};
    // Decoder trunk; empty mirrors `hidden`. The reference mixing-function
    // decoder is a separate network family, so its width is independent.
    std::vector<std::size_t> decoder_hidden = {};

    void validate(std::size_t dataset_rows = 0) const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

/// The label prior / encoder / decoder triple plus observation noise and
/// objective mode.
struct CiModel {
    MlpNet prior_net;   // u -> (mean, log_std) over z
    MlpNet encoder_net; // x -> (mean, log_std) over z
    MlpNet decoder_net; // z -> mean of x
    double obs_log_std = 0.0;
    bool obs_noise_fixed = true;
    Mode mode = Mode::IVae;
    std::size_t d_z = 0;
    std::size_t d_x = 0;
    std::size_t d_u = 0;

    /// Mutable views of every trainable tensor, in a fixed order. The
    /// observation noise scalar is included only when it is learnable.
    std::vector<std::pair<std::string, Tensor*>> named_params();
    std::vector<Tensor*> params();
};

/// Initial encoder log-std head bias. A tight encoder start keeps the
/// encoder's share of the fused-posterior precision from being overtaken by
/// the learned prior early in training (see build_model).
constexpr double kEncoderLogStdInit = -1.5;

/// Networks built per the config: prior/encoder emit 2*d_z values
/// (mean then log_std), decoder emits d_x. Weights are fan-in-scaled uniform
/// draws from the seeded generator; the prior's log-std head starts at 0 and
/// the encoder's at kEncoderLogStdInit.
CiModel build_model(const TrainConfig& config, Mode mode, std::uint64_t seed);

/// Plain forward through encoder, prior, and their fusion for one sample.
struct PosteriorTriple {
    gauss::DiagGaussian q_enc;
    gauss::DiagGaussian q_post;
    gauss::DiagGaussian prior;
};
PosteriorTriple posterior_of(const CiModel& model, const std::vector<double>& x,
                             const std::vector<double>& u);

/// Gaussian observation log density log N(x; decoder(z), exp(2*obs_log_std) I).
double recon_log_prob(const CiModel& model, const std::vector<double>& x,
                      const std::vector<double>& z);

/// Covariate-conditional generation: z from the label prior via reparam
/// noise, x = decoder(z); optionally adds observation noise.
std::vector<double> generate(const CiModel& model, const std::vector<double>& u,
                             const std::vector<double>& noise_z,
                             const std::vector<double>* noise_x = nullptr);

/// Batched helpers used by the objective and metrics paths.
Tensor gaussian_head_batch(const MlpNet& net, const Tensor& in, std::size_t d_z);
void head_row_to_gaussian(const Tensor& head, std::size_t row, gauss::DiagGaussian& out);

/// Model parameters bound onto a tape, forward helpers for the objective.
struct BoundModel {
    BoundMlp prior;
    BoundMlp encoder;
    BoundMlp decoder;
    ad::Var obs_log_std;                 // leaf when learnable, const otherwise
    std::vector<ad::Var> param_leaves;   // same order as CiModel::params()
};
BoundModel bind_model(ad::Tape& t, const CiModel& model);

nlohmann::json checkpoint_to_json(const CiModel& model, const TrainConfig& config,
                                  std::uint64_t seed);
CiModel checkpoint_from_json(const nlohmann::json& j, TrainConfig* config_out = nullptr);

void save_checkpoint(const std::string& path, const CiModel& model, const TrainConfig& config,
                     std::uint64_t seed);
CiModel load_checkpoint(const std::string& path, TrainConfig* config_out = nullptr);

} // namespace civae::models
