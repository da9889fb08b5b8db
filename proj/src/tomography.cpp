#include "dnslab/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "dnslab/rng.hpp"

namespace dnslab {

namespace {

constexpr double kProbClamp = 1e-9;

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

struct ParamLayout {
    int k_max;
    bool fit_f;
    bool fit_s;
    int dim() const { return k_max + 1 + (fit_f ? 1 : 0) + (fit_s ? 1 : 0); }
    int f_index() const { return k_max + 1; }
    int s_index() const { return k_max + 1 + (fit_f ? 1 : 0); }
};

void unpack(const std::vector<double>& z, const ParamLayout& lay,
            const ReconstructionConfig& config, std::vector<double>& p, double& f, double& s) {
    p.resize(lay.k_max + 1);
    double peak = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= lay.k_max; ++k) peak = std::max(peak, z[k]);
    double norm = 0.0;
    for (int k = 0; k <= lay.k_max; ++k) {
        p[k] = std::exp(z[k] - peak);
        norm += p[k];
    }
    for (int k = 0; k <= lay.k_max; ++k) p[k] /= norm;
    f = lay.fit_f ? 0.5 + 0.5 * sigmoid(z[lay.f_index()]) : config.readout_fidelity;
    s = lay.fit_s ? std::exp(z[lay.s_index()]) : config.rabi_scale;
}

// log-likelihood and, when grad is non-null, its gradient in z
double ll_eval(const RabiDataset& data, const std::vector<double>& z, const ParamLayout& lay,
               const ReconstructionConfig& config, double eta, std::vector<double>* grad) {
    std::vector<double> p;
    double f = 0.0, s = 0.0;
    unpack(z, lay, config, p, f, s);
    if (grad) grad->assign(lay.dim(), 0.0);

    std::vector<double> coupling(lay.k_max + 1);
    std::vector<double> cosv(lay.k_max + 1), sinv(lay.k_max + 1);
    double total = 0.0;
    for (const RabiBranch& branch : data.branches) {
        for (int k = 0; k <= lay.k_max; ++k)
            coupling[k] = matrix_element(k, branch.delta_n, eta);
        for (const RabiPoint& pt : branch.points) {
            double p_bare = 0.0;
            for (int k = 0; k <= lay.k_max; ++k) {
                const double phase = coupling[k] * s * pt.theta;
                cosv[k] = std::cos(phase);
                sinv[k] = std::sin(phase);
                p_bare += p[k] * 0.5 * (1.0 + cosv[k]);
            }
            const double p_raw = f * p_bare + (1.0 - f) * (1.0 - p_bare);
            const double p_obs = std::clamp(p_raw, kProbClamp, 1.0 - kProbClamp);
            const double c = pt.up_counts;
            const double n = pt.shots;
            total += c * std::log(p_obs) + (n - c) * std::log(1.0 - p_obs);

            if (!grad) continue;
            const bool clamped = (p_raw < kProbClamp) || (p_raw > 1.0 - kProbClamp);
            if (clamped) continue;
            const double w = c / p_obs - (n - c) / (1.0 - p_obs);
            const double contrast = 2.0 * f - 1.0;
            for (int k = 0; k <= lay.k_max; ++k)
                (*grad)[k] += w * contrast * p[k] * (0.5 * (1.0 + cosv[k]) - p_bare);
            if (lay.fit_f) {
                const double sig = sigmoid(z[lay.f_index()]);
                (*grad)[lay.f_index()] += w * (2.0 * p_bare - 1.0) * 0.5 * sig * (1.0 - sig);
            }
            if (lay.fit_s) {
                double dp_dv = 0.0;
                for (int k = 0; k <= lay.k_max; ++k)
                    dp_dv -= 0.5 * p[k] * sinv[k] * coupling[k] * pt.theta * s;
                (*grad)[lay.s_index()] += w * contrast * dp_dv;
            }
        }
    }
    return total;
}

double resolve_eta(const RabiDataset& data, const ReconstructionConfig& config) {
    return data.eta > 0.0 ? data.eta : config.eta;
}

struct OptimResult {
    std::vector<double> z;
    double ll = -std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
    std::vector<double> trace;
};

// BFGS ascent on the log-likelihood (descent on its negative) with a
// backtracking Armijo line search; accepted steps are monotone by
// construction.
OptimResult maximize(const RabiDataset& data, std::vector<double> z, const ParamLayout& lay,
                     const ReconstructionConfig& config, double eta) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const int dim = lay.dim();

    std::vector<double> grad_v;
    double ll = ll_eval(data, z, lay, config, eta, &grad_v);
    VectorXd g = -Eigen::Map<VectorXd>(grad_v.data(), dim); // gradient of -LL
    MatrixXd h_inv = MatrixXd::Identity(dim, dim);
    bool h_scaled = false;

    OptimResult result;
    result.trace.push_back(ll);

    int iter = 0;
    int small_streak = 0; // relative-change criterion must hold on consecutive steps
    for (; iter < config.max_iterations; ++iter) {
        VectorXd dir = -h_inv * g;
        if (dir.dot(g) >= 0.0) { // corrupted curvature, reset to steepest
            h_inv.setIdentity();
            h_scaled = false;
            dir = -g;
        }
        // trust-style step cap: a unit move in z is already a large model
        // change (logits and log-scale), and uncapped raw-gradient steps can
        // catapult the pulse-area scale onto an aliased plateau
        const double max_norm = h_scaled ? 5.0 : 1.0;
        if (dir.norm() > max_norm) dir *= max_norm / dir.norm();
        const double slope = g.dot(dir);
        if (!(slope < 0.0)) break; // stationary

        double step = 1.0;
        double ll_new = ll;
        std::vector<double> z_new(dim), grad_new;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
            for (int i = 0; i < dim; ++i) z_new[i] = z[i] + step * dir(i);
            ll_new = ll_eval(data, z_new, lay, config, eta, nullptr);
            if (-ll_new <= -ll + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;

        ll_eval(data, z_new, lay, config, eta, &grad_new);
        VectorXd g_new = -Eigen::Map<VectorXd>(grad_new.data(), dim);
        VectorXd s_vec = Eigen::Map<VectorXd>(z_new.data(), dim) - Eigen::Map<VectorXd>(z.data(), dim);
        VectorXd y_vec = g_new - g;
        const double sy = s_vec.dot(y_vec);
        if (sy > 1e-12 * s_vec.norm() * y_vec.norm()) {
            if (!h_scaled) { // initial curvature scale, before the first update
                h_inv = (sy / y_vec.squaredNorm()) * MatrixXd::Identity(dim, dim);
                h_scaled = true;
            }
            const MatrixXd outer_sy = s_vec * y_vec.transpose() / sy;
            h_inv = (MatrixXd::Identity(dim, dim) - outer_sy) * h_inv *
                        (MatrixXd::Identity(dim, dim) - outer_sy.transpose()) +
                    s_vec * s_vec.transpose() / sy;
        }

        const double change = std::abs(ll_new - ll);
        z = z_new;
        g = g_new;
        ll = ll_new;
        result.trace.push_back(ll);
        if (change <= config.tolerance * (1.0 + std::abs(ll))) {
            if (++small_streak >= 3) {
                result.converged = true;
                ++iter;
                break;
            }
        } else {
            small_streak = 0;
        }
    }
    if (g.lpNorm<Eigen::Infinity>() <= 1e-7 * (1.0 + std::abs(ll)))
        result.converged = true;
    result.z = std::move(z);
    result.ll = ll;
    result.iterations = iter;
    return result;
}

} // namespace

void ReconstructionConfig::validate() const {
    if (k_max < 1)
        throw std::invalid_argument("ReconstructionConfig: k_max must be >= 1");
    if (!(tolerance > 0.0))
        throw std::invalid_argument("ReconstructionConfig: tolerance must be positive");
    if (restarts < 1 || max_iterations < 1)
        throw std::invalid_argument("ReconstructionConfig: restarts and max_iterations must be positive");
    if (!(eta > 0.0 && eta < 1.0))
        throw std::invalid_argument("ReconstructionConfig: eta must lie in (0, 1)");
    if (!(readout_fidelity > 0.5 && readout_fidelity <= 1.0))
        throw std::invalid_argument("ReconstructionConfig: readout_fidelity must lie in (0.5, 1]");
    if (!(rabi_scale > 0.0))
        throw std::invalid_argument("ReconstructionConfig: rabi_scale must be positive");
}

double log_likelihood(const RabiDataset& data, const PhononDistribution& ppd,
                      const NuisanceParams& nuisance, double eta) {
    data.validate();
    ppd.validate(1e-6);
    if (!ppd.is_normalized(1e-6))
        throw std::invalid_argument("log_likelihood: ppd not normalized");

    double total = 0.0;
    for (const RabiBranch& branch : data.branches) {
        for (const RabiPoint& pt : branch.points) {
            double p_bare = 0.0;
            for (int k = 0; k <= ppd.k_max(); ++k) {
                const double m = matrix_element(k, branch.delta_n, eta);
                p_bare += ppd.probs[k] * 0.5 *
                          (1.0 + std::cos(m * nuisance.rabi_scale * pt.theta));
            }
            const double f = nuisance.readout_fidelity;
            const double p_obs =
                std::clamp(f * p_bare + (1.0 - f) * (1.0 - p_bare), kProbClamp, 1.0 - kProbClamp);
            total += pt.up_counts * std::log(p_obs) +
                     (pt.shots - pt.up_counts) * std::log(1.0 - p_obs);
        }
    }
    return total;
}

double log_likelihood_at(const RabiDataset& data, const std::vector<double>& z,
                         const ReconstructionConfig& config) {
    const ParamLayout lay{config.k_max, config.fit_readout_fidelity, config.fit_bare_rabi};
    if (static_cast<int>(z.size()) != lay.dim())
        throw std::invalid_argument("log_likelihood_at: wrong parameter dimension");
    return ll_eval(data, z, lay, config, resolve_eta(data, config), nullptr);
}

std::vector<double> log_likelihood_gradient(const RabiDataset& data,
                                            const std::vector<double>& z,
                                            const ReconstructionConfig& config) {
    const ParamLayout lay{config.k_max, config.fit_readout_fidelity, config.fit_bare_rabi};
    if (static_cast<int>(z.size()) != lay.dim())
        throw std::invalid_argument("log_likelihood_gradient: wrong parameter dimension");
    std::vector<double> grad;
    ll_eval(data, z, lay, config, resolve_eta(data, config), &grad);
    return grad;
}

ReconstructionResult reconstruct(const RabiDataset& data, const ReconstructionConfig& config) {
    config.validate();
    data.validate();

    std::size_t n_points = 0;
    bool sparse_branch = false;
    for (const RabiBranch& b : data.branches) {
        n_points += b.points.size();
        if (b.points.size() < 10) sparse_branch = true;
    }
    if (n_points == 0)
        throw std::invalid_argument("reconstruct: dataset has no points");

    const ParamLayout lay{config.k_max, config.fit_readout_fidelity, config.fit_bare_rabi};
    const double eta = resolve_eta(data, config);

    // start point: uniform PPD, configured nuisance values
    std::vector<double> z0(lay.dim(), 0.0);
    if (lay.fit_f) {
        const double sig = std::clamp(2.0 * config.readout_fidelity - 1.0, 1e-6, 1.0 - 1e-6);
        z0[lay.f_index()] = std::log(sig / (1.0 - sig));
    }
    if (lay.fit_s) z0[lay.s_index()] = std::log(config.rabi_scale);

    OptimResult best;
    double worst_ll = std::numeric_limits<double>::infinity();
    for (int r = 0; r < config.restarts; ++r) {
        std::vector<double> z = z0;
        if (r == 0 && lay.fit_s) {
            // two-phase start: fit (ppd, fidelity) at the configured pulse-area
            // scale first, then release the scale from that point. Joint fits
            // from a cold start can trade the scale against relabeled Fock
            // weights (an aliased likelihood basin); anchoring the first pass
            // at the calibration scale avoids it.
            ReconstructionConfig pinned = config;
            pinned.fit_bare_rabi = false;
            const ParamLayout lay_a{config.k_max, config.fit_readout_fidelity, false};
            std::vector<double> za(lay_a.dim(), 0.0);
            if (lay_a.fit_f) za[lay_a.f_index()] = z0[lay.f_index()];
            const OptimResult phase_a = maximize(data, std::move(za), lay_a, pinned, eta);
            for (int k = 0; k <= lay.k_max; ++k) z[k] = phase_a.z[k];
            if (lay.fit_f) z[lay.f_index()] = phase_a.z[lay_a.f_index()];
        } else if (r > 0) {
            Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(r)));
            for (int k = 0; k <= lay.k_max; ++k) z[k] += 0.7 * rng.normal();
            if (lay.fit_f) z[lay.f_index()] += 0.5 * rng.normal();
            if (lay.fit_s) z[lay.s_index()] += 0.03 * rng.normal();
        }
        OptimResult run = maximize(data, std::move(z), lay, config, eta);
        worst_ll = std::min(worst_ll, run.ll);
        if (run.ll > best.ll) best = std::move(run);
    }

    ReconstructionResult result;
    std::vector<double> p;
    double f = 0.0, s = 0.0;
    unpack(best.z, lay, config, p, f, s);
    result.ppd = PhononDistribution::normalized(std::move(p));
    result.readout_fidelity = f;
    result.rabi_scale = s;
    result.log_likelihood = best.ll;
    result.converged = best.converged;
    result.restart_spread = best.ll - worst_ll;
    result.iterations = best.iterations;
    result.ll_trace = std::move(best.trace);
    if (sparse_branch) {
        result.identifiability_warning = true;
        result.warning =
            "identifiability: a branch has fewer than 10 points; sideband branches are "
            "needed to break k-frequency degeneracies";
    }
    return result;
}

BootstrapErrors bootstrap_errors(const RabiDataset& data, const ReconstructionConfig& config,
                                 int resamples) {
    if (resamples < 50)
        throw std::invalid_argument("bootstrap_errors: resamples must be >= 50");
    const ReconstructionResult base = reconstruct(data, config);
    const double eta = resolve_eta(data, config);
    const NuisanceParams nuisance{base.readout_fidelity, base.rabi_scale};

    // model probabilities at the fitted point
    RabiDataset model = data;
    std::vector<std::vector<double>> probs(3);
    for (int bi = 0; bi < 3; ++bi) {
        const RabiBranch& b = data.branches[bi];
        probs[bi].reserve(b.points.size());
        for (const RabiPoint& pt : b.points) {
            double p_bare = 0.0;
            for (int k = 0; k <= base.ppd.k_max(); ++k) {
                const double m = matrix_element(k, b.delta_n, eta);
                p_bare += base.ppd.probs[k] * 0.5 *
                          (1.0 + std::cos(m * nuisance.rabi_scale * pt.theta));
            }
            probs[bi].push_back(std::clamp(nuisance.readout_fidelity * p_bare +
                                               (1.0 - nuisance.readout_fidelity) * (1.0 - p_bare),
                                           0.0, 1.0));
        }
    }

    BootstrapErrors out;
    out.resamples = resamples;
    std::vector<std::vector<double>> draws(config.k_max + 1);
    for (int r = 0; r < resamples; ++r) {
        Rng rng(mix_seed(config.seed ^ 0xb005757a9ULL, static_cast<std::uint64_t>(r)));
        for (int bi = 0; bi < 3; ++bi)
            for (std::size_t i = 0; i < model.branches[bi].points.size(); ++i)
                model.branches[bi].points[i].up_counts =
                    rng.binomial(model.branches[bi].points[i].shots, probs[bi][i]);
        ReconstructionConfig cfg = config;
        cfg.seed = mix_seed(config.seed, 0x5eedULL + r);
        const ReconstructionResult fit = reconstruct(model, cfg);
        if (!fit.converged) ++out.nonconverged;
        for (int k = 0; k <= config.k_max; ++k)
            draws[k].push_back(fit.ppd.probs[k]);
    }
    out.stderr_per_k.resize(config.k_max + 1);
    for (int k = 0; k <= config.k_max; ++k) {
        double mean = 0.0;
        for (double v : draws[k]) mean += v;
        mean /= draws[k].size();
        double var = 0.0;
        for (double v : draws[k]) var += (v - mean) * (v - mean);
        out.stderr_per_k[k] = std::sqrt(var / draws[k].size());
    }
    return out;
}

namespace {

double alpha_fit_residual(const PhononDistribution& ppd, const DiagonalDensity& rho0,
                          double alpha) {
    const int k_max = ppd.k_max();
    std::map<int, PhononDistribution> pure;
    for (int m = 0; m <= rho0.diag.k_max(); ++m)
        if (rho0.diag.probs[m] > 0.0)
            pure.emplace(m, dns_ppd({m, {alpha, 0.0}}, k_max));
    const PhononDistribution model = convolve_preparation(pure, rho0);
    double r = 0.0;
    for (int k = 0; k <= k_max; ++k) {
        const double d = ppd.probs[k] - model.probs[k];
        r += d * d;
    }
    return r;
}

double golden_refine(const std::function<double(double)>& fn, double lo, double hi) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = fn(x1), f2 = fn(x2);
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = fn(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = fn(x2);
        }
        if (b - a < 1e-12) break;
    }
    return 0.5 * (a + b);
}

} // namespace

AlphaFit extract_alpha(const PhononDistribution& ppd, int n, const DiagonalDensity& rho0,
                       double alpha_max) {
    if (n < 0)
        throw std::invalid_argument("extract_alpha: n must be nonnegative");
    if (rho0.diag.k_max() < n)
        throw std::invalid_argument("extract_alpha: rho0 does not cover the preparation number");
    rho0.diag.validate(1e-6);
    ppd.validate(1e-6);
    if (!(alpha_max > 0.0))
        throw std::invalid_argument("extract_alpha: alpha_max must be positive");

    const auto residual = [&](double a) { return alpha_fit_residual(ppd, rho0, a); };

    constexpr int kGrid = 400;
    std::vector<double> grid(kGrid + 1), vals(kGrid + 1);
    for (int i = 0; i <= kGrid; ++i) {
        grid[i] = alpha_max * static_cast<double>(i) / kGrid;
        vals[i] = residual(grid[i]);
    }

    // local minima of the scan, refined by golden section
    std::vector<std::pair<double, double>> minima; // (residual, alpha)
    for (int i = 0; i <= kGrid; ++i) {
        const bool left_ok = (i == 0) || vals[i] <= vals[i - 1];
        const bool right_ok = (i == kGrid) || vals[i] <= vals[i + 1];
        if (!(left_ok && right_ok)) continue;
        const double lo = grid[std::max(0, i - 1)];
        const double hi = grid[std::min(kGrid, i + 1)];
        const double a = golden_refine(residual, lo, hi);
        minima.emplace_back(residual(a), a);
    }
    std::sort(minima.begin(), minima.end());
    // drop duplicates that refined into the same basin
    minima.erase(std::unique(minima.begin(), minima.end(),
                             [&](const auto& u, const auto& v) {
                                 return std::abs(u.second - v.second) < 2.0 * alpha_max / kGrid;
                             }),
                 minima.end());

    AlphaFit fit;
    fit.residual = minima.front().first;
    fit.alpha_abs = minima.front().second;
    if (minima.size() > 1) {
        fit.second_best_alpha = minima[1].second;
        fit.degenerate_minima = (minima[1].first - minima[0].first) < 1e-3;
    }
    return fit;
}

} // namespace dnslab
