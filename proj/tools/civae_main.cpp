// civae: batch experiment runner for the identifiable-VAE laboratory.
//
// Subcommands: gen, train, eval, alpha-report, collapse.
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "civae/csvio.hpp"
#include "civae/errors.hpp"
#include "civae/flows.hpp"
#include "civae/metrics.hpp"
#include "civae/model.hpp"
#include "civae/objective.hpp"
#include "civae/rng.hpp"
#include "civae/serialize.hpp"
#include "civae/synthdata.hpp"
#include "civae/train.hpp"

namespace fs = std::filesystem;
using namespace civae;

namespace {

struct GenOptions {
    std::string scheme = "sine";
    std::size_t n = 5000;
    std::uint64_t seed = 0;
    std::uint64_t gt_seed = 4242;
    double obs_noise = 1.0;
    std::size_t d_x = 100;
    std::vector<double> fractions = {0.8, 0.1, 0.1};
    std::string out;
};

struct TrainOptions {
    std::string data_dir;
    std::string out;
    std::string mode = "ci";
    std::uint64_t seed = 0;
    std::size_t restarts = 2;
    models::TrainConfig config; // dims filled from the manifest
    bool learn_obs_noise = false;
    bool quiet = false;
    std::vector<std::size_t> hidden; // empty -> scheme default
};

struct EvalCmdOptions {
    std::string checkpoint;
    std::string data_dir;
    std::string out;
    std::size_t loglik_draws = 256;
    std::size_t class_bins = 10;
    std::uint64_t seed = 1;
};

struct AlphaReportOptions {
    std::string checkpoint;
    std::string data_dir;
    std::string out;
    std::size_t grid = 1001;
    std::size_t k = 64;
    std::uint64_t seed = 1;
};

struct CollapseOptions {
    std::string scheme = "sine";
    std::vector<double> gammas;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t n = 5000;
    std::size_t epochs = 30;
    std::size_t batch_size = 300;
    std::size_t restarts = 1;
    std::uint64_t gt_seed = 4242;
};

std::vector<std::size_t> default_hidden(const std::string& scheme) {
    if (scheme == "quadratic" || scheme == "two_circles") return {60, 60, 60};
    return {60, 60};
}

nlohmann::json config_echo(const std::string& command, nlohmann::json body) {
    body["command"] = command;
    return body;
}

int cmd_gen(const GenOptions& opt) {
    const auto gt = flows::random_coupling_stack(opt.d_x, opt.gt_seed);
    auto ds = synth::generate(opt.scheme, opt.n, opt.seed, gt, opt.gt_seed, opt.obs_noise);
    synth::split_dataset(ds, opt.fractions, opt.seed);
    synth::save_dataset(opt.out, ds, &gt);
    std::size_t counts[3] = {0, 0, 0};
    for (int s : ds.split) counts[s] += 1;
    std::cout << "wrote " << opt.out << ": n=" << ds.n() << " split " << counts[0] << "/"
              << counts[1] << "/" << counts[2] << "\n";
    return 0;
}

models::TrainConfig resolve_train_config(const TrainOptions& opt,
                                         const synth::LabeledDataset& ds) {
    models::TrainConfig cfg = opt.config;
    cfg.seed = opt.seed;
    cfg.d_x = ds.d_x();
    cfg.d_u = ds.d_u();
    cfg.obs_noise_fixed = !opt.learn_obs_noise;
    cfg.hidden = opt.hidden.empty() ? default_hidden(ds.scheme) : opt.hidden;
    cfg.validate();
    return cfg;
}

int cmd_train(const TrainOptions& opt) {
    const auto ds = synth::load_dataset(opt.data_dir);
    const models::TrainConfig cfg = resolve_train_config(opt, ds);
    const models::Mode mode = models::mode_from_string(opt.mode);
    if (opt.restarts == 0) throw ConfigError("train: restarts must be >= 1");
    fs::create_directories(opt.out);
    const nlohmann::json echo =
        config_echo("train", nlohmann::json{{"mode", opt.mode},
                                            {"seed", opt.seed},
                                            {"restarts", opt.restarts},
                                            {"data", opt.data_dir},
                                            {"config", cfg.to_json()}});

    try {
        std::vector<models::TrainResult> results;
        std::size_t best = 0;
        for (std::size_t r = 0; r < opt.restarts; ++r) {
            models::TrainConfig rcfg = cfg;
            rcfg.seed = mix_seed(opt.seed, 0x7e5 + r);
            models::ProgressFn progress;
            if (!opt.quiet)
                progress = [&](std::size_t epoch, double trn, double val) {
                    std::cout << "restart " << r << " epoch " << epoch << " train " << trn
                              << " val " << val << "\n";
                };
            const auto model0 = models::build_model(rcfg, mode, rcfg.seed);
            results.push_back(models::train(model0, ds, rcfg, progress));
            if (results[r].final_val_loss() < results[best].final_val_loss()) best = r;
        }
        const auto& chosen = results[best];

        models::TrainConfig best_cfg = cfg;
        best_cfg.seed = mix_seed(opt.seed, 0x7e5 + best);
        models::save_checkpoint((fs::path(opt.out) / "checkpoint.json").string(),
                                chosen.model, best_cfg, opt.seed);
        std::vector<std::vector<double>> rows;
        for (std::size_t e = 0; e < chosen.train_loss.size(); ++e) {
            rows.push_back({static_cast<double>(e), 0.0, chosen.train_loss[e]});
            rows.push_back({static_cast<double>(e), 1.0, chosen.val_loss[e]});
        }
        io::write_csv((fs::path(opt.out) / "loss_history.csv").string(), echo.dump(),
                      "epoch,split_train0_val1,neg_elbo", rows);
        nlohmann::json summary{{"selected_restart", best},
                               {"config", echo},
                               {"restarts", nlohmann::json::array()}};
        for (std::size_t r = 0; r < results.size(); ++r)
            summary["restarts"].push_back(
                nlohmann::json{{"restart", r},
                               {"final_val_loss", results[r].final_val_loss()},
                               {"final_train_loss", results[r].train_loss.back()},
                               {"skipped_batches", results[r].skipped_batches}});
        write_json_file((fs::path(opt.out) / "train_summary.json").string(), summary);
        std::cout << "wrote " << opt.out << "/checkpoint.json (restart " << best << ")\n";
        return 0;
    } catch (const NumericError& e) {
        // Aborted runs leave a failure record and no checkpoint.
        nlohmann::json failure{{"error", e.what()}, {"stage", "train"}, {"config", echo}};
        write_json_file((fs::path(opt.out) / "failure.json").string(), failure);
        std::error_code ec;
        fs::remove(fs::path(opt.out) / "checkpoint.json", ec);
        throw;
    }
}

int cmd_eval(const EvalCmdOptions& opt) {
    models::TrainConfig cfg;
    const auto model = models::load_checkpoint(opt.checkpoint, &cfg);
    const auto ds = synth::load_dataset(opt.data_dir);
    if (ds.d_x() != model.d_x || ds.d_u() != model.d_u)
        throw ConfigError("eval: dataset dims (" + std::to_string(ds.d_x()) + "," +
                          std::to_string(ds.d_u()) + ") do not match checkpoint (" +
                          std::to_string(model.d_x) + "," + std::to_string(model.d_u) + ")");
    auto rows = ds.indices_of(synth::Split::Test);
    if (rows.empty()) {
        rows.resize(ds.n());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    metrics::EvalOptions mopts;
    mopts.loglik_draws = opt.loglik_draws;
    mopts.seed = opt.seed;
    mopts.class_bins = opt.class_bins;
    const auto report = metrics::evaluate_model(model, ds, rows, mopts);

    fs::create_directories(opt.out);
    const nlohmann::json echo =
        config_echo("eval", nlohmann::json{{"checkpoint", opt.checkpoint},
                                           {"data", opt.data_dir},
                                           {"loglik_draws", opt.loglik_draws},
                                           {"seed", opt.seed},
                                           {"mode", models::to_string(model.mode)},
                                           {"scheme", ds.scheme},
                                           {"train_config", cfg.to_json()}});
    nlohmann::json rj = report.to_json();
    rj["config"] = echo;
    rj["n_eval_rows"] = rows.size();
    write_json_file((fs::path(opt.out) / "report.json").string(), rj);
    io::write_csv(
        (fs::path(opt.out) / "report_row.csv").string(), echo.dump(),
        "seed,mcc_post,mcc_enc,cod_post,cod_enc,loglik,loglik_se,ssw_sst,collapse_score",
        {{static_cast<double>(opt.seed), report.mcc_post.value, report.mcc_enc.value,
          report.cod_post.value, report.cod_enc.value, report.loglik.value,
          report.loglik.se, report.ssw_sst.value, report.collapse.value}});
    std::cout << "wrote " << opt.out << "/report.json\n";
    return 0;
}

int classify_alpha(double a) { return a == 0.0 ? 0 : (a == 1.0 ? 2 : 1); }

int cmd_alpha_report(const AlphaReportOptions& opt) {
    models::TrainConfig cfg;
    const auto model = models::load_checkpoint(opt.checkpoint, &cfg);
    if (model.mode != models::Mode::Ci)
        throw ConfigError("alpha-report: checkpoint mode is " + to_string(model.mode) +
                          ", expected ci");
    const auto ds = synth::load_dataset(opt.data_dir);
    if (ds.d_x() != model.d_x || ds.d_u() != model.d_u)
        throw ConfigError("alpha-report: dataset dims do not match checkpoint");
    auto rows = ds.indices_of(synth::Split::Test);
    if (rows.empty()) {
        rows.resize(ds.n());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
    }

    std::vector<objective::AlphaRecord> records;
    records.reserve(rows.size());
    Rng noise_rng(mix_seed(opt.seed, 0xa1fa));
    Tensor noise = Tensor::zeros({opt.k, model.d_z});
    for (std::size_t i : rows) {
        for (auto& v : noise.data) v = noise_rng.normal();
        const auto ev = objective::evaluate_sample(model, ds.x_row(i), ds.u_row(i), noise);
        records.push_back(objective::alpha_record_from(ev, opt.grid));
    }

    // 3x3 contingency over {0, interior, 1}: grid rows, formula columns.
    std::size_t table[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    std::vector<double> ag, af;
    for (const auto& r : records) {
        table[classify_alpha(r.alpha_grid)][classify_alpha(r.alpha_formula)] += 1;
        ag.push_back(r.alpha_grid);
        af.push_back(r.alpha_formula);
    }
    double corr = 0.0;
    {
        const double ma = std::accumulate(ag.begin(), ag.end(), 0.0) / ag.size();
        const double mb = std::accumulate(af.begin(), af.end(), 0.0) / af.size();
        double sab = 0.0, saa = 0.0, sbb = 0.0;
        for (std::size_t i = 0; i < ag.size(); ++i) {
            sab += (ag[i] - ma) * (af[i] - mb);
            saa += (ag[i] - ma) * (ag[i] - ma);
            sbb += (af[i] - mb) * (af[i] - mb);
        }
        corr = saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
    }

    fs::create_directories(opt.out);
    const nlohmann::json echo =
        config_echo("alpha-report", nlohmann::json{{"checkpoint", opt.checkpoint},
                                                   {"data", opt.data_dir},
                                                   {"grid", opt.grid},
                                                   {"k", opt.k},
                                                   {"seed", opt.seed},
                                                   {"scheme", ds.scheme}});
    objective::write_alpha_records_csv((fs::path(opt.out) / "alpha_records.csv").string(),
                                       echo.dump(), records);
    nlohmann::json cj{{"config", echo},
                      {"n", records.size()},
                      {"grid_formula_correlation", corr},
                      {"cells_grid_rows_formula_cols",
                       {{table[0][0], table[0][1], table[0][2]},
                        {table[1][0], table[1][1], table[1][2]},
                        {table[2][0], table[2][1], table[2][2]}}}};
    write_json_file((fs::path(opt.out) / "contingency.json").string(), cj);
    std::cout << "wrote " << opt.out << "/alpha_records.csv (correlation " << corr << ")\n";
    return 0;
}

int cmd_collapse(const CollapseOptions& opt) {
    if (opt.gammas.empty()) throw ConfigError("collapse: gamma list must be nonempty");
    fs::create_directories(opt.out);
    const nlohmann::json echo = config_echo(
        "collapse", nlohmann::json{{"scheme", opt.scheme},
                                   {"gammas", opt.gammas},
                                   {"seed", opt.seed},
                                   {"n", opt.n},
                                   {"epochs", opt.epochs},
                                   {"restarts", opt.restarts},
                                   {"mode_legend", "0 = ivae, 1 = ci"}});
    std::vector<std::vector<double>> rows;
    nlohmann::json failures = nlohmann::json::array();
    for (std::size_t gi = 0; gi < opt.gammas.size(); ++gi) {
        const double gamma = opt.gammas[gi];
        try {
            if (!(gamma > 0.0)) throw ConfigError("collapse: gamma must be positive");
            const auto gt = flows::random_coupling_stack(100, opt.gt_seed);
            auto ds = synth::generate(opt.scheme, opt.n, mix_seed(opt.seed, 0x9a + gi), gt,
                                      opt.gt_seed, std::sqrt(gamma));
            synth::split_dataset(ds, {0.8, 0.1, 0.1}, opt.seed);
            for (const auto mode : {models::Mode::IVae, models::Mode::Ci}) {
                models::TrainConfig cfg;
                cfg.epochs = opt.epochs;
                cfg.batch_size =
                    std::min(opt.batch_size, ds.indices_of(synth::Split::Train).size());
                cfg.seed = mix_seed(opt.seed, 0x300 + gi);
                cfg.d_x = ds.d_x();
                cfg.d_u = ds.d_u();
                cfg.hidden = default_hidden(opt.scheme);
                cfg.obs_log_std = 0.5 * std::log(gamma);
                cfg.obs_noise_fixed = true;

                models::TrainResult best;
                for (std::size_t r = 0; r < opt.restarts; ++r) {
                    models::TrainConfig rcfg = cfg;
                    rcfg.seed = mix_seed(cfg.seed, 0x7e5 + r);
                    auto result =
                        models::train(models::build_model(rcfg, mode, rcfg.seed), ds, rcfg);
                    if (r == 0 || result.final_val_loss() < best.final_val_loss())
                        best = std::move(result);
                }
                const auto test_rows = ds.indices_of(synth::Split::Test);
                metrics::EvalOptions mopts;
                mopts.loglik_draws = 128;
                mopts.seed = mix_seed(opt.seed, 0x400 + gi);
                const auto report = metrics::evaluate_model(best.model, ds, test_rows, mopts);
                rows.push_back({gamma, mode == models::Mode::Ci ? 1.0 : 0.0,
                                report.collapse.value, report.cod_post.value,
                                report.mcc_post.value, report.loglik.value});
                std::cout << "gamma " << gamma << " mode " << to_string(mode)
                          << " collapse_score " << report.collapse.value << "\n";
            }
        } catch (const std::exception& e) {
            std::cerr << "[collapse] gamma " << gamma << " failed: " << e.what() << "\n";
            failures.push_back(nlohmann::json{{"gamma", gamma}, {"error", e.what()}});
        }
    }
    io::write_csv((fs::path(opt.out) / "collapse_curve.csv").string(), echo.dump(),
                  "gamma,mode_ivae0_ci1,collapse_score,cod_post,mcc_post,loglik", rows);
    if (!failures.empty())
        write_json_file((fs::path(opt.out) / "collapse_failures.json").string(),
                        nlohmann::json{{"failures", failures}, {"config", echo}});
    std::cout << "wrote " << opt.out << "/collapse_curve.csv\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"civae: identifiable-VAE laboratory (data generation, training, "
                 "evaluation, alpha analysis, collapse experiments)"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* cgen = app.add_subcommand("gen", "Generate a synthetic dataset");
    cgen->add_option("--scheme", gen.scheme, "sine|quadratic|two_circles")
        ->check(CLI::IsMember({"sine", "quadratic", "two_circles"}));
    cgen->add_option("--n", gen.n, "sample count");
    cgen->add_option("--seed", gen.seed, "data seed")->required();
    cgen->add_option("--gt-seed", gen.gt_seed, "ground-truth mixing-function seed");
    cgen->add_option("--obs-noise", gen.obs_noise, "observation noise std");
    cgen->add_option("--d-x", gen.d_x, "observation dimension");
    cgen->add_option("--fractions", gen.fractions, "train/val/test fractions")->expected(3);
    cgen->add_option("--out", gen.out, "output directory")->required();

    TrainOptions tr;
    auto* ctrain = app.add_subcommand("train", "Train a model on a dataset directory");
    ctrain->add_option("--data", tr.data_dir, "dataset directory")->required();
    ctrain->add_option("--out", tr.out, "output directory")->required();
    ctrain->add_option("--mode", tr.mode, "ivae|encoder_elbo|ci")
        ->check(CLI::IsMember({"ivae", "encoder_elbo", "ci"}));
    ctrain->add_option("--seed", tr.seed, "training seed")->required();
    ctrain->add_option("--restarts", tr.restarts, "independent restarts");
    ctrain->add_option("--epochs", tr.config.epochs, "epochs");
    ctrain->add_option("--batch-size", tr.config.batch_size, "batch size");
    ctrain->add_option("--lr", tr.config.learning_rate, "Adam learning rate");
    ctrain->add_option("--weight-decay", tr.config.weight_decay,
                       "decoupled weight decay (0 disables)");
    ctrain->add_option("--k-train", tr.config.k_train, "MC draws per sample");
    ctrain->add_option("--grid-train", tr.config.alpha_grid_train,
                       "alpha grid during training");
    ctrain->add_option("--d-z", tr.config.d_z, "latent dimension");
    ctrain->add_option("--obs-log-std", tr.config.obs_log_std, "observation noise log std");
    ctrain->add_flag("--learn-obs-noise", tr.learn_obs_noise,
                     "make the observation noise scale learnable");
    ctrain->add_flag("--quiet", tr.quiet, "suppress per-epoch progress lines");
    ctrain->add_option("--hidden", tr.hidden, "hidden layer widths");

    EvalCmdOptions ev;
    auto* ceval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
    ceval->add_option("--checkpoint", ev.checkpoint, "checkpoint.json")->required();
    ceval->add_option("--data", ev.data_dir, "dataset directory")->required();
    ceval->add_option("--out", ev.out, "output directory")->required();
    ceval->add_option("--loglik-draws", ev.loglik_draws, "MC draws for log-likelihood");
    ceval->add_option("--class-bins", ev.class_bins, "covariate bins for SSW/SST");
    ceval->add_option("--seed", ev.seed, "evaluation seed");

    AlphaReportOptions ar;
    auto* creport =
        app.add_subcommand("alpha-report", "Grid-vs-formula alpha analysis on test samples");
    creport->add_option("--checkpoint", ar.checkpoint, "ci checkpoint.json")->required();
    creport->add_option("--data", ar.data_dir, "dataset directory")->required();
    creport->add_option("--out", ar.out, "output directory")->required();
    creport->add_option("--grid", ar.grid, "grid resolution");
    creport->add_option("--k", ar.k, "MC draws per sample");
    creport->add_option("--seed", ar.seed, "noise seed");

    CollapseOptions co;
    auto* ccollapse =
        app.add_subcommand("collapse", "Observation-noise sweep comparing ivae and ci");
    ccollapse->add_option("--scheme", co.scheme, "sine|quadratic|two_circles")
        ->check(CLI::IsMember({"sine", "quadratic", "two_circles"}));
    ccollapse->add_option("--gammas", co.gammas, "observation noise variances")->required();
    ccollapse->add_option("--out", co.out, "output directory")->required();
    ccollapse->add_option("--seed", co.seed, "base seed")->required();
    ccollapse->add_option("--n", co.n, "sample count per dataset");
    ccollapse->add_option("--epochs", co.epochs, "epochs per run");
    ccollapse->add_option("--batch-size", co.batch_size, "batch size per run");
    ccollapse->add_option("--restarts", co.restarts, "restarts per run");
    ccollapse->add_option("--gt-seed", co.gt_seed, "ground-truth mixing-function seed");

    try {
        app.parse(argc, argv);
        if (cgen->parsed()) return cmd_gen(gen);
        if (ctrain->parsed()) return cmd_train(tr);
        if (ceval->parsed()) return cmd_eval(ev);
        if (creport->parsed()) return cmd_alpha_report(ar);
        if (ccollapse->parsed()) return cmd_collapse(co);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
