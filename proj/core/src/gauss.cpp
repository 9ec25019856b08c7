#include "civae/gauss.hpp"

#include <cmath>
#include <string>

#include "civae/errors.hpp"

namespace civae::gauss {

namespace {
constexpr double kLogTwoPi = 1.8378770664093453; // log(2*pi)

void require_dim(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw ConfigError(std::string("gauss: ") + what + " dimension mismatch " +
                          std::to_string(a) + " vs " + std::to_string(b));
}
} // namespace

DiagGaussian::DiagGaussian(std::vector<double> mean_, std::vector<double> log_std_)
    : mean(std::move(mean_)), log_std(std::move(log_std_)) {
    if (mean.size() != log_std.size() || mean.empty())
        throw ConfigError("gauss: mean/log_std sizes " + std::to_string(mean.size()) + "/" +
                          std::to_string(log_std.size()) + " invalid");
    for (double v : log_std)
        if (!std::isfinite(v)) throw NumericError("gauss: non-finite log_std");
    for (double v : mean)
        if (!std::isfinite(v)) throw NumericError("gauss: non-finite mean");
}

double DiagGaussian::var(std::size_t j) const { return std::exp(2.0 * log_std[j]); }

DiagGaussian DiagGaussian::standard(std::size_t d) {
    return DiagGaussian(std::vector<double>(d, 0.0), std::vector<double>(d, 0.0));
}

double log_pdf(const DiagGaussian& g, const std::vector<double>& z) {
    require_dim(g.dim(), z.size(), "log_pdf");
    double acc = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        const double s = std::exp(g.log_std[j]);
        const double r = (z[j] - g.mean[j]) / s;
        acc += -0.5 * kLogTwoPi - g.log_std[j] - 0.5 * r * r;
    }
    return acc;
}

double kl(const DiagGaussian& p, const DiagGaussian& q) {
    require_dim(p.dim(), q.dim(), "kl");
    double acc = 0.0;
    for (std::size_t j = 0; j < p.dim(); ++j) {
        const double vp = p.var(j);
        const double vq = q.var(j);
        const double dm = p.mean[j] - q.mean[j];
        acc += q.log_std[j] - p.log_std[j] + (vp + dm * dm) / (2.0 * vq) - 0.5;
    }
    return acc;
}

DiagGaussian fuse(const DiagGaussian& enc, const DiagGaussian& prior) {
    require_dim(enc.dim(), prior.dim(), "fuse");
    std::vector<double> mean(enc.dim()), log_std(enc.dim());
    for (std::size_t j = 0; j < enc.dim(); ++j) {
        const double pe = std::exp(-2.0 * enc.log_std[j]);
        const double pp = std::exp(-2.0 * prior.log_std[j]);
        const double prec = pe + pp;
        mean[j] = (pe * enc.mean[j] + pp * prior.mean[j]) / prec;
        log_std[j] = -0.5 * std::log(prec);
    }
    return DiagGaussian(std::move(mean), std::move(log_std));
}

std::vector<double> sample(const DiagGaussian& g, const std::vector<double>& noise) {
    require_dim(g.dim(), noise.size(), "sample");
    std::vector<double> z(g.dim());
    for (std::size_t j = 0; j < g.dim(); ++j)
        z[j] = g.mean[j] + std::exp(g.log_std[j]) * noise[j];
    return z;
}

std::pair<double, double> coord_moments(const DiagGaussian& g, std::size_t j, MomentKind kind) {
    if (j >= g.dim())
        throw ConfigError("gauss: coordinate " + std::to_string(j) + " out of range for dim " +
                          std::to_string(g.dim()));
    const double mu = g.mean[j];
    const double v = g.var(j);
    if (kind == MomentKind::Linear) return {mu, v};
    // E z^2 = mu^2 + v; Var z^2 = 2 v^2 + 4 mu^2 v.
    return {mu * mu + v, 2.0 * v * v + 4.0 * mu * mu * v};
}

GaussVars head_to_gaussian(ad::Tape& t, ad::Var head, std::size_t d) {
    const Tensor& h = t.value(head);
    if (h.rank() != 2 || h.shape[1] != 2 * d)
        throw ConfigError("gauss: head shape " + shape_str(h.shape) + " does not hold 2*" +
                          std::to_string(d) + " columns");
    // Column-selection by constant 0/1 matrices keeps the split on the tape.
    Tensor sel_mean = Tensor::zeros({2 * d, d});
    Tensor sel_ls = Tensor::zeros({2 * d, d});
    for (std::size_t j = 0; j < d; ++j) {
        sel_mean.at(j, j) = 1.0;
        sel_ls.at(d + j, j) = 1.0;
    }
    GaussVars g;
    g.mean = t.matmul(head, t.constant(std::move(sel_mean)));
    g.log_std = t.clamp(t.matmul(head, t.constant(std::move(sel_ls))), -kLogStdClamp,
                        kLogStdClamp);
    return g;
}

ad::Var log_pdf_rows(ad::Tape& t, const GaussVars& g, ad::Var z) {
    ad::Var diff = t.sub(z, g.mean);
    ad::Var inv_var = t.exp(ad::scale(t, g.log_std, -2.0));
    ad::Var quad = t.mul(t.square(diff), inv_var);
    ad::Var per_coord =
        ad::add_scalar(t, t.add(ad::scale(t, quad, 0.5), g.log_std), 0.5 * kLogTwoPi);
    return ad::neg(t, t.sum(per_coord, 1));
}

ad::Var kl_rows(ad::Tape& t, const GaussVars& p, const GaussVars& q) {
    ad::Var inv_vq = t.exp(ad::scale(t, q.log_std, -2.0));
    ad::Var vp = t.exp(ad::scale(t, p.log_std, 2.0));
    ad::Var dm2 = t.square(t.sub(p.mean, q.mean));
    ad::Var ratio = ad::scale(t, t.mul(t.add(vp, dm2), inv_vq), 0.5);
    ad::Var per_coord =
        ad::add_scalar(t, t.add(t.sub(q.log_std, p.log_std), ratio), -0.5);
    return t.sum(per_coord, 1);
}

GaussVars fuse_rows(ad::Tape& t, const GaussVars& enc, const GaussVars& prior) {
    ad::Var pe = t.exp(ad::scale(t, enc.log_std, -2.0));
    ad::Var pp = t.exp(ad::scale(t, prior.log_std, -2.0));
    ad::Var prec = t.add(pe, pp);
    ad::Var log_prec = t.log(prec);
    ad::Var inv_prec = t.exp(ad::neg(t, log_prec));
    GaussVars out;
    out.mean = t.mul(inv_prec, t.add(t.mul(pe, enc.mean), t.mul(pp, prior.mean)));
    out.log_std = ad::scale(t, log_prec, -0.5);
    return out;
}

ad::Var reparam_rows(ad::Tape& t, const GaussVars& g, const Tensor& noise) {
    if (!noise.same_shape(t.value(g.mean)))
        throw ConfigError("gauss: noise shape " + shape_str(noise.shape) +
                          " does not match mean shape " + shape_str(t.value(g.mean).shape));
    ad::Var eps = t.constant(noise);
    return t.add(g.mean, t.mul(t.exp(g.log_std), eps));
}

} // namespace civae::gauss
