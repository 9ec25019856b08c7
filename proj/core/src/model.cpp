#include "civae/model.hpp"

#include <cmath>

#include "civae/errors.hpp"
#include "civae/serialize.hpp"

namespace civae::models {

Mode mode_from_string(const std::string& s) {
    if (s == "ivae") return Mode::IVae;
    if (s == "encoder_elbo") return Mode::EncoderElbo;
    if (s == "ci") return Mode::Ci;
    throw ConfigError("unknown mode '" + s + "' (expected ivae|encoder_elbo|ci)");
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::IVae: return "ivae";
        case Mode::EncoderElbo: return "encoder_elbo";
        case Mode::Ci: return "ci";
    }
    return "?";
}

void TrainConfig::validate(std::size_t dataset_rows) const {
    if (epochs == 0 || batch_size == 0) throw ConfigError("config: epochs/batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("config: weight_decay must be nonnegative");
    if (k_train == 0) throw ConfigError("config: k_train must be >= 1");
    if (alpha_grid_train < 2) throw ConfigError("config: alpha_grid_train must be >= 2");
    if (d_z == 0 || d_x == 0 || d_u == 0) throw ConfigError("config: dimensions must be positive");
    if (!std::isfinite(obs_log_std)) throw ConfigError("config: obs_log_std must be finite");
    if (dataset_rows > 0 && batch_size > dataset_rows)
        throw ConfigError("config: batch_size " + std::to_string(batch_size) +
                          " exceeds dataset size " + std::to_string(dataset_rows));
}

nlohmann::json TrainConfig::to_json() const {
    return nlohmann::json{{"epochs", epochs},
                          {"batch_size", batch_size},
                          {"learning_rate", learning_rate},
                          {"weight_decay", weight_decay},
                          {"seed", seed},
                          {"k_train", k_train},
                          {"alpha_grid_train", alpha_grid_train},
                          {"obs_noise_fixed", obs_noise_fixed},
                          {"obs_log_std", obs_log_std},
                          {"d_z", d_z},
                          {"d_x", d_x},
                          {"d_u", d_u},
                          {"hidden", hidden},
                          {"decoder_hidden", decoder_hidden}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.epochs = j.at("epochs").get<std::size_t>();
        c.batch_size = j.at("batch_size").get<std::size_t>();
        c.learning_rate = j.at("learning_rate").get<double>();
        c.weight_decay = j.value("weight_decay", 0.0);
        c.seed = j.at("seed").get<std::uint64_t>();
        c.k_train = j.at("k_train").get<std::size_t>();
        c.alpha_grid_train = j.at("alpha_grid_train").get<std::size_t>();
        c.obs_noise_fixed = j.at("obs_noise_fixed").get<bool>();
        c.obs_log_std = j.at("obs_log_std").get<double>();
        c.d_z = j.at("d_z").get<std::size_t>();
        c.d_x = j.at("d_x").get<std::size_t>();
        c.d_u = j.at("d_u").get<std::size_t>();
        c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
        c.decoder_hidden = j.value("decoder_hidden", std::vector<std::size_t>{});
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed train config: ") + e.what());
    }
    return c;
}

std::vector<std::pair<std::string, Tensor*>> CiModel::named_params() {
    std::vector<std::pair<std::string, Tensor*>> out;
    const auto add_net = [&out](const std::string& prefix, MlpNet& net) {
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            out.emplace_back(prefix + "." + std::to_string(i) + ".weight",
                             &net.layers[i].weight);
            out.emplace_back(prefix + "." + std::to_string(i) + ".bias", &net.layers[i].bias);
        }
    };
    add_net("prior", prior_net);
    add_net("encoder", encoder_net);
    add_net("decoder", decoder_net);
    return out;
}

std::vector<Tensor*> CiModel::params() {
    std::vector<Tensor*> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

CiModel build_model(const TrainConfig& config, Mode mode, std::uint64_t seed) {
    config.validate();
    CiModel m;
    m.mode = mode;
    m.d_z = config.d_z;
    m.d_x = config.d_x;
    m.d_u = config.d_u;
    m.obs_log_std = config.obs_log_std;
    m.obs_noise_fixed = config.obs_noise_fixed;

    const auto dims_with = [&](std::size_t in, const std::vector<std::size_t>& hidden,
                               std::size_t out) {
        std::vector<std::size_t> dims;
        dims.push_back(in);
        for (std::size_t h : hidden) dims.push_back(h);
        dims.push_back(out);
        return dims;
    };
    const auto& dec_hidden = config.decoder_hidden.empty() ? config.hidden
                                                           : config.decoder_hidden;
    Rng r_prior(mix_seed(seed, 1));
    Rng r_enc(mix_seed(seed, 2));
    Rng r_dec(mix_seed(seed, 3));
    m.prior_net = make_mlp(dims_with(config.d_u, config.hidden, 2 * config.d_z),
                           Activation::Tanh, r_prior, config.d_z);
    m.encoder_net = make_mlp(dims_with(config.d_x, config.hidden, 2 * config.d_z),
                             Activation::Tanh, r_enc, config.d_z);
    // The encoder starts tight (sigma ~ e^-1.5). With equal-precision starts the
    // learned prior out-sharpens the encoder within a few epochs, the fusion
    // stops carrying observation information, and every samplewise mixture
    // weight freezes at the posterior endpoint; a precise encoder start keeps
    // the encoder side of the fusion live at every data scale tested.
    for (std::size_t c = config.d_z; c < 2 * config.d_z; ++c)
        m.encoder_net.layers.back().bias.data[c] = kEncoderLogStdInit;
    m.decoder_net = make_mlp(dims_with(config.d_z, dec_hidden, config.d_x),
                             Activation::LeakyRelu, r_dec);
    return m;
}

namespace {
gauss::DiagGaussian head_to_plain(const std::vector<double>& head, std::size_t d_z) {
    std::vector<double> mean(head.begin(), head.begin() + d_z);
    std::vector<double> ls(head.begin() + d_z, head.end());
    for (auto& v : ls)
        v = v < -gauss::kLogStdClamp ? -gauss::kLogStdClamp
                                     : (v > gauss::kLogStdClamp ? gauss::kLogStdClamp : v);
    return gauss::DiagGaussian(std::move(mean), std::move(ls));
}
} // namespace

PosteriorTriple posterior_of(const CiModel& model, const std::vector<double>& x,
                             const std::vector<double>& u) {
    if (x.size() != model.d_x || u.size() != model.d_u)
        throw ConfigError("posterior_of: sample dims (" + std::to_string(x.size()) + "," +
                          std::to_string(u.size()) + ") do not match model (" +
                          std::to_string(model.d_x) + "," + std::to_string(model.d_u) + ")");
    PosteriorTriple out;
    const std::vector<double> eh = model.encoder_net.forward(x);
    const std::vector<double> ph = model.prior_net.forward(u);
    for (double v : eh)
        if (!std::isfinite(v)) throw NumericError("posterior_of: non-finite encoder output");
    for (double v : ph)
        if (!std::isfinite(v)) throw NumericError("posterior_of: non-finite prior output");
    out.q_enc = head_to_plain(eh, model.d_z);
    out.prior = head_to_plain(ph, model.d_z);
    out.q_post = gauss::fuse(out.q_enc, out.prior);
    return out;
}

double recon_log_prob(const CiModel& model, const std::vector<double>& x,
                      const std::vector<double>& z) {
    if (x.size() != model.d_x || z.size() != model.d_z)
        throw ConfigError("recon_log_prob: dims do not match model");
    const std::vector<double> mean = model.decoder_net.forward(z);
    gauss::DiagGaussian obs(mean, std::vector<double>(model.d_x, model.obs_log_std));
    const double lp = gauss::log_pdf(obs, x);
    if (!std::isfinite(lp)) throw NumericError("recon_log_prob: non-finite log density");
    return lp;
}

std::vector<double> generate(const CiModel& model, const std::vector<double>& u,
                             const std::vector<double>& noise_z,
                             const std::vector<double>* noise_x) {
    const std::vector<double> ph = model.prior_net.forward(u);
    const gauss::DiagGaussian prior = head_to_plain(ph, model.d_z);
    const std::vector<double> z = gauss::sample(prior, noise_z);
    std::vector<double> x = model.decoder_net.forward(z);
    if (noise_x) {
        if (noise_x->size() != x.size())
            throw ConfigError("generate: observation noise dim mismatch");
        const double s = std::exp(model.obs_log_std);
        for (std::size_t j = 0; j < x.size(); ++j) x[j] += s * (*noise_x)[j];
    }
    return x;
}

Tensor gaussian_head_batch(const MlpNet& net, const Tensor& in, std::size_t d_z) {
    Tensor head = net.forward(in);
    if (head.shape[1] != 2 * d_z)
        throw ConfigError("gaussian head width " + std::to_string(head.shape[1]) +
                          " does not hold 2*" + std::to_string(d_z) + " values");
    if (!head.finite()) throw NumericError("non-finite network head");
    // Clamp log-std columns in place.
    for (std::size_t r = 0; r < head.shape[0]; ++r)
        for (std::size_t c = d_z; c < 2 * d_z; ++c) {
            double& v = head.at(r, c);
            v = v < -gauss::kLogStdClamp ? -gauss::kLogStdClamp
                                         : (v > gauss::kLogStdClamp ? gauss::kLogStdClamp : v);
        }
    return head;
}

void head_row_to_gaussian(const Tensor& head, std::size_t row, gauss::DiagGaussian& out) {
    const std::size_t d = head.shape[1] / 2;
    out.mean.assign(head.data.begin() + row * 2 * d, head.data.begin() + row * 2 * d + d);
    out.log_std.assign(head.data.begin() + row * 2 * d + d,
                       head.data.begin() + (row + 1) * 2 * d);
}

BoundModel bind_model(ad::Tape& t, const CiModel& model) {
    BoundModel b;
    b.prior = bind_mlp(t, model.prior_net);
    b.encoder = bind_mlp(t, model.encoder_net);
    b.decoder = bind_mlp(t, model.decoder_net);
    const auto collect = [&b](const BoundMlp& net) {
        for (const auto& [w, bias] : net.layers) {
            b.param_leaves.push_back(w);
            b.param_leaves.push_back(bias);
        }
    };
    collect(b.prior);
    collect(b.encoder);
    collect(b.decoder);
    if (model.obs_noise_fixed) {
        b.obs_log_std = t.constant(model.obs_log_std);
    } else {
        b.obs_log_std = t.leaf(Tensor::scalar(model.obs_log_std));
        b.param_leaves.push_back(b.obs_log_std);
    }
    return b;
}

nlohmann::json checkpoint_to_json(const CiModel& model, const TrainConfig& config,
                                  std::uint64_t seed) {
    return nlohmann::json{{"format_version", 1},
                          {"kind", "civae_checkpoint"},
                          {"mode", to_string(model.mode)},
                          {"seed", seed},
                          {"config", config.to_json()},
                          {"obs_log_std", model.obs_log_std},
                          {"obs_noise_fixed", model.obs_noise_fixed},
                          {"prior_net", mlp_to_json(model.prior_net)},
                          {"encoder_net", mlp_to_json(model.encoder_net)},
                          {"decoder_net", mlp_to_json(model.decoder_net)}};
}

CiModel checkpoint_from_json(const nlohmann::json& j, TrainConfig* config_out) {
    CiModel m;
    try {
        if (j.at("kind").get<std::string>() != "civae_checkpoint")
            throw DataError("not a checkpoint record");
        const TrainConfig config = TrainConfig::from_json(j.at("config"));
        if (config_out) *config_out = config;
        m.mode = mode_from_string(j.at("mode").get<std::string>());
        m.obs_log_std = j.at("obs_log_std").get<double>();
        m.obs_noise_fixed = j.at("obs_noise_fixed").get<bool>();
        m.prior_net = mlp_from_json(j.at("prior_net"));
        m.encoder_net = mlp_from_json(j.at("encoder_net"));
        m.decoder_net = mlp_from_json(j.at("decoder_net"));
        m.d_z = config.d_z;
        m.d_x = config.d_x;
        m.d_u = config.d_u;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
    if (m.prior_net.out_dim() != 2 * m.d_z || m.encoder_net.out_dim() != 2 * m.d_z ||
        m.decoder_net.in_dim() != m.d_z)
        throw DataError("checkpoint: latent dimensions disagree across networks");
    return m;
}

void save_checkpoint(const std::string& path, const CiModel& model, const TrainConfig& config,
                     std::uint64_t seed) {
    write_json_file(path, checkpoint_to_json(model, config, seed));
}

CiModel load_checkpoint(const std::string& path, TrainConfig* config_out) {
    return checkpoint_from_json(read_json_file(path), config_out);
}

} // namespace civae::models
