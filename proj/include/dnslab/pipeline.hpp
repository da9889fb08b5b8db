#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dnslab/config.hpp"
#include "dnslab/kick.hpp"
#include "dnslab/tomography.hpp"

namespace dnslab {

// One preparation's end-to-end experiment: kick simulation, forward
// synthesis, reconstruction and displacement extraction over a voltage sweep.
struct ExperimentPlan {
    int preparation_n = 1;
    std::vector<double> v_k_list;        // must include 0 (the zero-kick reference run)
    int shots = 200;
    std::vector<double> theta_grid;
    std::uint64_t seed = 1;
    ExperimentConfig config;
    std::string out_dir;
    double preparation_fidelity = -1.0;  // < 0 picks the default table below
    int truth_k_max = 40;
    int reconstruct_k_max = 12;
    int restarts = 8;

    void validate() const;
};

// on-target preparation weights used when the plan does not override them
double default_preparation_fidelity(int n);

// diagonal preparation density: `fidelity` on |n>, remainder one level below
// (on |1> for n = 0, where no lower level exists)
DiagonalDensity preparation_density(int n, double fidelity, int k_max);

struct PipelinePoint {
    double v_k = 0.0;
    double alpha_sim = 0.0;        // energy-route |alpha| from the kick simulation
    double alpha_integral = 0.0;   // phase-space-integral |alpha|
    double alpha_fit = 0.0;        // extracted from the reconstructed PPD
    double fit_residual = 0.0;
    double truth_tail_mass = 0.0;  // forward-model truncation mass at truth_k_max
    double truth_mass_beyond_reconstruction = 0.0;
    ReconstructionResult reconstruction;
};

struct PipelineReport {
    int preparation_n = 0;
    std::uint64_t seed = 0;
    std::vector<PipelinePoint> points;
    QuarticFit alpha_fit_quartic;
    DiagonalDensity rho0_hat; // zero-kick reconstruction
    std::vector<std::string> files;
    bool complete = false;
};

// Runs the full pipeline for one plan and emits, under plan.out_dir:
//   fig2_n<n>.csv      reconstructed PPD per kick voltage
//   fig3_n<n>.csv      alpha_fit vs V_k with the quartic fit and alpha_sim overlay
//   fig3_n<n>_fit.json quartic coefficients and residual
//   fig4_n<n>.csv      reconstructed PPD vs alpha_fit with the convolved-model overlay
//   raw_n<n>.csv       per-voltage simulation and truncation diagnostics
//   manifest_n<n>.json file roles and the seed
// Outputs are deterministic for a fixed (plan, seed). Any stage failure halts
// with a stage-tagged error; the manifest then marks the run incomplete.
PipelineReport run_pipeline(const ExperimentPlan& plan);

// plan with every default wired from the config (voltages 0..2 V in 200 mV
// steps, default grids and seeds)
ExperimentPlan default_plan(int preparation_n, const ExperimentConfig& config,
                            const std::string& out_dir, std::uint64_t seed);

} // namespace dnslab
