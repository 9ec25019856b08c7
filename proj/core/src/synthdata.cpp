#include "civae/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "civae/csvio.hpp"
#include "civae/errors.hpp"
#include "civae/rng.hpp"
#include "civae/serialize.hpp"

namespace civae::synth {

namespace fs = std::filesystem;

std::vector<double> LabeledDataset::x_row(std::size_t i) const {
    return {X.data.begin() + i * d_x(), X.data.begin() + (i + 1) * d_x()};
}
std::vector<double> LabeledDataset::u_row(std::size_t i) const {
    return {U.data.begin() + i * d_u(), U.data.begin() + (i + 1) * d_u()};
}
std::vector<double> LabeledDataset::z_row(std::size_t i) const {
    return {Z.data.begin() + i * d_z(), Z.data.begin() + (i + 1) * d_z()};
}

std::vector<std::size_t> LabeledDataset::indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == static_cast<int>(s)) out.push_back(i);
    return out;
}

void LabeledDataset::validate() const {
    if (n() == 0) throw DataError("dataset: empty");
    if (U.shape[0] != n()) throw DataError("dataset: X/U row counts differ");
    if (has_ground_truth() && Z.shape[0] != n())
        throw DataError("dataset: X/Z row counts differ");
    if (!split.empty() && split.size() != n())
        throw DataError("dataset: split tag count differs from rows");
    if (!X.finite() || !U.finite() || (has_ground_truth() && !Z.finite()))
        throw DataError("dataset: non-finite entries");
}

SchemeMoments sine_moments(double u) {
    return {{u, 2.0 * std::sin(u)}, std::max(u / (4.0 * M_PI), kVarianceFloor)};
}

SchemeMoments quadratic_moments(double u) {
    return {{u, u * u}, std::max((2.0 * u + M_PI) / (4.0 * M_PI), kVarianceFloor)};
}

SchemeMoments two_circles_moments(double u1, int cls) {
    const double r = static_cast<double>(cls); // classes 1 and 2 map to radii 1 and 2
    return {{r * std::cos(u1), r * std::sin(u1)},
            std::max((M_PI - std::fabs(u1)) / (10.0 * M_PI), kVarianceFloor)};
}

namespace {

constexpr std::uint64_t kRowStream = 0x10000;

struct RowDraw {
    std::vector<double> u; // encoded covariate row
    std::vector<double> z; // latent draw
};

template <typename DrawFn>
LabeledDataset gen_common(const std::string& scheme, std::size_t n, std::uint64_t seed,
                          const flows::CouplingStack& gt, std::uint64_t gt_seed,
                          double obs_noise_std, std::size_t d_u, DrawFn&& draw) {
    if (n == 0) throw ConfigError("generate: n must be >= 1");
    const std::size_t d_x = gt.dim;
    const std::size_t d_z = 2;
    LabeledDataset ds;
    ds.scheme = scheme;
    ds.seed = seed;
    ds.gt_flow_seed = gt_seed;
    ds.obs_noise_std = obs_noise_std;
    ds.X = Tensor::zeros({n, d_x});
    ds.U = Tensor::zeros({n, d_u});
    ds.Z = Tensor::zeros({n, d_z});
    const std::vector<double> pad = flows::pad_constants(d_z, d_x, gt_seed);

    std::vector<double> padded(d_x);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, kRowStream + i));
        const RowDraw row = draw(rng);
        std::copy(row.u.begin(), row.u.end(), ds.U.data.begin() + i * d_u);
        std::copy(row.z.begin(), row.z.end(), ds.Z.data.begin() + i * d_z);
        std::copy(row.z.begin(), row.z.end(), padded.begin());
        std::copy(pad.begin(), pad.end(), padded.begin() + d_z);
        const std::vector<double> mixed = flows::flow_forward(gt, padded);
        for (std::size_t j = 0; j < d_x; ++j)
            ds.X.at(i, j) = mixed[j] + obs_noise_std * rng.normal();
    }
    ds.split.assign(n, static_cast<int>(Split::Train));
    return ds;
}

RowDraw draw_gaussian_latent(Rng& rng, const SchemeMoments& m, std::vector<double> u_enc) {
    RowDraw row;
    row.u = std::move(u_enc);
    const double sd = std::sqrt(m.var);
    row.z = {m.mean[0] + sd * rng.normal(), m.mean[1] + sd * rng.normal()};
    return row;
}

} // namespace

LabeledDataset gen_sine(std::size_t n, std::uint64_t seed, const flows::CouplingStack& gt,
                        std::uint64_t gt_seed, double obs_noise_std) {
    return gen_common("sine", n, seed, gt, gt_seed, obs_noise_std, 1, [](Rng& rng) {
        const double u = rng.uniform(0.0, 2.0 * M_PI);
        return draw_gaussian_latent(rng, sine_moments(u), {u});
    });
}

LabeledDataset gen_quadratic(std::size_t n, std::uint64_t seed, const flows::CouplingStack& gt,
                             std::uint64_t gt_seed, double obs_noise_std) {
    return gen_common("quadratic", n, seed, gt, gt_seed, obs_noise_std, 1, [](Rng& rng) {
        const double u = rng.uniform(-M_PI / 2.0, M_PI / 2.0);
        return draw_gaussian_latent(rng, quadratic_moments(u), {u});
    });
}

LabeledDataset gen_two_circles(std::size_t n, std::uint64_t seed,
                               const flows::CouplingStack& gt, std::uint64_t gt_seed,
                               double obs_noise_std) {
    // Covariate encoding: (angle, one-hot class), d_u = 3.
    return gen_common("two_circles", n, seed, gt, gt_seed, obs_noise_std, 3, [](Rng& rng) {
        const double u1 = rng.uniform(-M_PI, M_PI);
        const int cls = rng.uniform() < 0.5 ? 1 : 2;
        return draw_gaussian_latent(rng, two_circles_moments(u1, cls),
                                    {u1, cls == 1 ? 1.0 : 0.0, cls == 2 ? 1.0 : 0.0});
    });
}

LabeledDataset generate(const std::string& scheme, std::size_t n, std::uint64_t seed,
                        const flows::CouplingStack& gt, std::uint64_t gt_seed,
                        double obs_noise_std) {
    if (scheme == "sine") return gen_sine(n, seed, gt, gt_seed, obs_noise_std);
    if (scheme == "quadratic") return gen_quadratic(n, seed, gt, gt_seed, obs_noise_std);
    if (scheme == "two_circles") return gen_two_circles(n, seed, gt, gt_seed, obs_noise_std);
    throw ConfigError("generate: unknown scheme '" + scheme +
                      "' (expected sine|quadratic|two_circles)");
}

void split_dataset(LabeledDataset& ds, const std::vector<double>& fractions,
                   std::uint64_t seed) {
    double sum = 0.0;
    for (double f : fractions) {
        if (f < 0.0) throw ConfigError("split: negative fraction");
        sum += f;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");
    if (fractions.size() != 3) throw ConfigError("split: expected train/val/test fractions");

    std::vector<std::size_t> idx(ds.n());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(mix_seed(seed, 0x5b717));
    rng.shuffle(idx);

    ds.split.assign(ds.n(), 0);
    const auto nd = static_cast<double>(ds.n());
    const std::size_t b1 = static_cast<std::size_t>(std::floor(fractions[0] * nd));
    const std::size_t b2 =
        static_cast<std::size_t>(std::floor((fractions[0] + fractions[1]) * nd));
    for (std::size_t pos = 0; pos < idx.size(); ++pos) {
        const int tag = pos < b1 ? 0 : (pos < b2 ? 1 : 2);
        ds.split[idx[pos]] = tag;
    }
    ds.fractions = fractions;
}

namespace {

Tensor matrix_from_rows(const std::vector<std::vector<double>>& rows, const std::string& what) {
    if (rows.empty()) throw DataError(what + ": no rows");
    const std::size_t cols = rows.front().size();
    Tensor t = Tensor::zeros({rows.size(), cols});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) throw DataError(what + ": ragged rows");
        std::copy(rows[i].begin(), rows[i].end(), t.data.begin() + i * cols);
    }
    return t;
}

std::vector<std::vector<double>> rows_of(const Tensor& t) {
    std::vector<std::vector<double>> rows(t.shape[0]);
    for (std::size_t i = 0; i < t.shape[0]; ++i)
        rows[i].assign(t.data.begin() + i * t.shape[1], t.data.begin() + (i + 1) * t.shape[1]);
    return rows;
}

} // namespace

void save_dataset(const std::string& dir, const LabeledDataset& ds,
                  const flows::CouplingStack* gt_flow) {
    ds.validate();
    fs::create_directories(dir);
    std::size_t counts[3] = {0, 0, 0};
    for (int s : ds.split) counts[s] += 1;
    nlohmann::json manifest{{"format_version", 1},
                            {"kind", "civae_dataset"},
                            {"scheme", ds.scheme},
                            {"n", ds.n()},
                            {"seed", ds.seed},
                            {"gt_flow_seed", ds.gt_flow_seed},
                            {"obs_noise_std", ds.obs_noise_std},
                            {"d_x", ds.d_x()},
                            {"d_u", ds.d_u()},
                            {"d_z", ds.d_z()},
                            {"has_ground_truth", ds.has_ground_truth()},
                            {"fractions", ds.fractions},
                            {"split_counts", {counts[0], counts[1], counts[2]}}};
    write_json_file((fs::path(dir) / "manifest.json").string(), manifest);
    const std::string echo = manifest.dump();
    io::write_csv((fs::path(dir) / "X.csv").string(), echo, "", rows_of(ds.X));
    io::write_csv((fs::path(dir) / "U.csv").string(), echo, "", rows_of(ds.U));
    if (ds.has_ground_truth())
        io::write_csv((fs::path(dir) / "Z.csv").string(), echo, "", rows_of(ds.Z));
    std::vector<std::vector<double>> split_rows(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i)
        split_rows[i] = {static_cast<double>(ds.split[i])};
    io::write_csv((fs::path(dir) / "split.csv").string(), echo, "", split_rows);
    if (gt_flow)
        write_json_file((fs::path(dir) / "gt_flow.json").string(), flow_to_json(*gt_flow));
}

LabeledDataset load_dataset(const std::string& dir) {
    const nlohmann::json manifest = read_json_file((fs::path(dir) / "manifest.json").string());
    LabeledDataset ds;
    try {
        if (manifest.at("kind").get<std::string>() != "civae_dataset")
            throw DataError("not a dataset manifest");
        ds.scheme = manifest.at("scheme").get<std::string>();
        ds.seed = manifest.at("seed").get<std::uint64_t>();
        ds.gt_flow_seed = manifest.at("gt_flow_seed").get<std::uint64_t>();
        ds.obs_noise_std = manifest.at("obs_noise_std").get<double>();
        ds.fractions = manifest.at("fractions").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    ds.X = matrix_from_rows(io::read_csv((fs::path(dir) / "X.csv").string()), "X.csv");
    ds.U = matrix_from_rows(io::read_csv((fs::path(dir) / "U.csv").string()), "U.csv");
    if (manifest.at("has_ground_truth").get<bool>())
        ds.Z = matrix_from_rows(io::read_csv((fs::path(dir) / "Z.csv").string()), "Z.csv");
    const auto split_rows = io::read_csv((fs::path(dir) / "split.csv").string());
    ds.split.reserve(split_rows.size());
    for (const auto& row : split_rows) {
        if (row.size() != 1) throw DataError("split.csv: expected one tag per row");
        ds.split.push_back(static_cast<int>(row[0]));
    }
    const std::size_t n = manifest.at("n").get<std::size_t>();
    if (ds.n() != n || ds.d_x() != manifest.at("d_x").get<std::size_t>() ||
        ds.d_u() != manifest.at("d_u").get<std::size_t>())
        throw DataError("dataset: manifest dimensions disagree with CSV contents");
    ds.validate();
    return ds;
}

} // namespace civae::synth
