#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dnslab/fock.hpp"
#include "dnslab/sideband.hpp"

namespace dnslab {

// Settings for the maximum-likelihood PPD reconstruction.
struct ReconstructionConfig {
    int k_max = 6;
    bool fit_readout_fidelity = true;
    bool fit_bare_rabi = true; // fits a multiplicative pulse-area scale
    int restarts = 8;
    double tolerance = 1e-11; // relative log-likelihood change
    int max_iterations = 2000;
    std::uint64_t seed = 0;
    double eta = 0.21;                // used when the dataset carries none
    double readout_fidelity = 0.98;   // start value; fixed value when not fitted
    double rabi_scale = 1.0;          // start value; fixed value when not fitted

    void validate() const;
};

struct NuisanceParams {
    double readout_fidelity = 1.0;
    double rabi_scale = 1.0;
};

struct ReconstructionResult {
    PhononDistribution ppd;
    double readout_fidelity = 1.0;
    double rabi_scale = 1.0;
    double log_likelihood = 0.0;
    bool converged = false;
    double restart_spread = 0.0; // max log-likelihood gap across restarts
    int iterations = 0;
    bool identifiability_warning = false;
    std::string warning;
    std::vector<double> ll_trace; // accepted-step log-likelihoods, best restart
};

// Binomial log-likelihood of the dataset under the Rabi model, with model
// probabilities clamped to [1e-9, 1 - 1e-9]. The combinatorial constant is
// omitted; the value is always <= 0.
double log_likelihood(const RabiDataset& data, const PhononDistribution& ppd,
                      const NuisanceParams& nuisance, double eta);

// Maximizes the likelihood over the PPD simplex (softmax-parameterized, so
// normalization holds by construction) and the enabled nuisance parameters,
// with seeded multi-start BFGS ascent. Non-convergence is reported through
// the flag, never as a silent partial result.
ReconstructionResult reconstruct(const RabiDataset& data, const ReconstructionConfig& config);

struct BootstrapErrors {
    std::vector<double> stderr_per_k;
    int resamples = 0;
    int nonconverged = 0;
};

// Parametric bootstrap: binomial counts resampled at the fitted model,
// reconstruction re-run per resample; seeded and deterministic.
BootstrapErrors bootstrap_errors(const RabiDataset& data, const ReconstructionConfig& config,
                                 int resamples);

struct AlphaFit {
    double alpha_abs = 0.0;
    double residual = 0.0;
    bool degenerate_minima = false; // second local minimum within 1e-3 in residual
    double second_best_alpha = 0.0;
};

// One-dimensional least-squares fit of |alpha|: minimizes
//   sum_k (ppd_k - convolve(pure PPDs at |alpha|, rho0)_k)^2
// by a bracketed scan plus golden-section refinement. Near-degenerate minima
// are reported through the flag, with the best returned.
AlphaFit extract_alpha(const PhononDistribution& ppd, int n, const DiagonalDensity& rho0,
                       double alpha_max = 3.2);

// analytic gradient of log_likelihood in the unconstrained parameterization;
// exposed for the finite-difference consistency checks
std::vector<double> log_likelihood_gradient(const RabiDataset& data,
                                            const std::vector<double>& z,
                                            const ReconstructionConfig& config);
double log_likelihood_at(const RabiDataset& data, const std::vector<double>& z,
                         const ReconstructionConfig& config);

} // namespace dnslab
