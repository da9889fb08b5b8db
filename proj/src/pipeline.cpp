#include "dnslab/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dnslab/rng.hpp"

namespace dnslab {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

[[noreturn]] void stage_fail(const std::string& stage, const std::exception& e) {
    throw std::runtime_error("pipeline stage '" + stage + "': " + e.what());
}

} // namespace

void ExperimentPlan::validate() const {
    if (preparation_n < 0)
        throw std::invalid_argument("plan: preparation_n must be nonnegative");
    if (v_k_list.empty())
        throw std::invalid_argument("plan: empty voltage list");
    bool has_zero = false;
    for (double v : v_k_list)
        if (std::abs(v) < 1e-12) has_zero = true;
    if (!has_zero)
        throw std::invalid_argument(
            "plan: v_k_list must include 0 (zero-kick run needed for the preparation density)");
    if (shots <= 0 || theta_grid.empty())
        throw std::invalid_argument("plan: bad measurement settings");
    if (out_dir.empty())
        throw std::invalid_argument("plan: output directory required");
    if (truth_k_max < reconstruct_k_max || reconstruct_k_max < 1)
        throw std::invalid_argument("plan: bad k_max settings");
    if (preparation_fidelity >= 0.0 &&
        !(preparation_fidelity > 0.5 && preparation_fidelity <= 1.0))
        throw std::invalid_argument("plan: preparation fidelity must lie in (0.5, 1]");
    config.validate();
}

double default_preparation_fidelity(int n) {
    switch (n) {
        case 0: return 0.92;
        case 1: return 0.77;
        case 2: return 0.72;
        default: return 0.7; // beyond the measured table; conservative guess
    }
}

DiagonalDensity preparation_density(int n, double fidelity, int k_max) {
    if (n < 0 || k_max < std::max(n, 1))
        throw std::invalid_argument("preparation_density: bad indices");
    if (!(fidelity > 0.5 && fidelity <= 1.0))
        throw std::invalid_argument("preparation_density: fidelity must lie in (0.5, 1]");
    std::vector<double> w(k_max + 1, 0.0);
    w[n] = fidelity;
    if (n >= 1)
        w[n - 1] = 1.0 - fidelity;
    else
        w[1] = 1.0 - fidelity; // no level below the ground state
    return DiagonalDensity{PhononDistribution::normalized(std::move(w))};
}

ExperimentPlan default_plan(int preparation_n, const ExperimentConfig& config,
                            const std::string& out_dir, std::uint64_t seed) {
    ExperimentPlan plan;
    plan.preparation_n = preparation_n;
    for (int i = 0; i <= 10; ++i)
        plan.v_k_list.push_back(0.2 * i);
    plan.shots = config.shots;
    plan.theta_grid = config.theta_grid();
    plan.seed = seed;
    plan.config = config;
    plan.out_dir = out_dir;
    plan.truth_k_max = config.truth_k_max;
    plan.reconstruct_k_max = std::max(config.reconstruct_k_max, 12);
    plan.restarts = config.restarts;
    return plan;
}

PipelineReport run_pipeline(const ExperimentPlan& plan) {
    plan.validate();
    std::filesystem::create_directories(plan.out_dir);

    PipelineReport report;
    report.preparation_n = plan.preparation_n;
    report.seed = plan.seed;
    const std::string tag = "_n" + std::to_string(plan.preparation_n);

    const double fidelity = plan.preparation_fidelity >= 0.0
                                ? plan.preparation_fidelity
                                : default_preparation_fidelity(plan.preparation_n);

    // --- kick simulation per voltage -------------------------------------
    TrapModel trap;
    SweepResult sweep;
    try {
        trap = calibrate_gaussian_trap(plan.config.trap_anchors());
        sweep = sweep_alpha_vs_voltage(trap, plan.config.kick_settings(), plan.v_k_list);
    } catch (const std::exception& e) {
        stage_fail("kick-simulation", e);
    }

    const DiagonalDensity rho0_true =
        preparation_density(plan.preparation_n, fidelity, plan.truth_k_max);
    const CouplingConfig coupling = plan.config.coupling();

    // --- forward synthesis and reconstruction per voltage ----------------
    ReconstructionConfig rc;
    rc.k_max = plan.reconstruct_k_max;
    rc.restarts = plan.restarts;
    rc.eta = coupling.eta;
    rc.readout_fidelity = std::min(coupling.readout_fidelity, 1.0 - 1e-6);

    for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
        const SweepRow& row = sweep.rows[i];
        PipelinePoint point;
        point.v_k = row.v_k;
        point.alpha_sim = row.alpha_abs;
        point.alpha_integral = row.alpha_integral;
        try {
            std::map<int, PhononDistribution> pure;
            for (int m = 0; m <= rho0_true.diag.k_max(); ++m)
                if (rho0_true.diag.probs[m] > 0.0)
                    pure.emplace(m, dns_ppd({m, {row.alpha_abs, 0.0}}, plan.truth_k_max));
            const PhononDistribution truth = convolve_preparation(pure, rho0_true);
            point.truth_tail_mass = truth.tail_mass;
            double head = 0.0;
            for (int k = 0; k <= plan.reconstruct_k_max; ++k) head += truth.probs[k];
            point.truth_mass_beyond_reconstruction = std::max(0.0, 1.0 - head);

            const RabiDataset data = synthesize_dataset(
                truth, coupling, plan.theta_grid, plan.shots,
                mix_seed(plan.seed, 1000 + i));
            rc.seed = mix_seed(plan.seed, 2000 + i);
            point.reconstruction = reconstruct(data, rc);
            if (!point.reconstruction.converged)
                throw std::runtime_error("reconstruction did not converge at V_k = " +
                                         format_double(row.v_k));
        } catch (const std::exception& e) {
            stage_fail("reconstruction", e);
        }
        report.points.push_back(std::move(point));
    }

    // --- zero-kick preparation density, then alpha extraction ------------
    try {
        const PipelinePoint* zero = nullptr;
        for (const PipelinePoint& p : report.points)
            if (std::abs(p.v_k) < 1e-12) zero = &p;
        if (!zero)
            throw std::runtime_error("no zero-kick point in the sweep");
        report.rho0_hat = DiagonalDensity{zero->reconstruction.ppd};
        for (PipelinePoint& p : report.points) {
            const AlphaFit fit =
                extract_alpha(p.reconstruction.ppd, plan.preparation_n, report.rho0_hat);
            p.alpha_fit = fit.alpha_abs;
            p.fit_residual = fit.residual;
        }
        std::vector<double> vs, alphas;
        for (const PipelinePoint& p : report.points) {
            vs.push_back(p.v_k);
            alphas.push_back(p.alpha_fit);
        }
        report.alpha_fit_quartic = fit_quartic_through_origin(vs, alphas);
    } catch (const std::exception& e) {
        stage_fail("alpha-extraction", e);
    }

    // --- emitted tables ----------------------------------------------------
    try {
        const auto path = [&](const std::string& name) {
            return (std::filesystem::path(plan.out_dir) / name).string();
        };

        std::string fig2 = "v_k";
        for (int k = 0; k <= plan.reconstruct_k_max; ++k)
            fig2 += ",p" + std::to_string(k);
        fig2 += '\n';
        for (const PipelinePoint& p : report.points) {
            fig2 += format_double(p.v_k);
            for (double pk : p.reconstruction.ppd.probs)
                fig2 += "," + format_double(pk);
            fig2 += '\n';
        }
        write_file(path("fig2" + tag + ".csv"), fig2);

        std::string fig3 = "v_k,alpha_fit,alpha_quartic,alpha_sim\n";
        for (const PipelinePoint& p : report.points)
            fig3 += format_double(p.v_k) + "," + format_double(p.alpha_fit) + "," +
                    format_double(report.alpha_fit_quartic.eval(p.v_k)) + "," +
                    format_double(p.alpha_sim) + '\n';
        write_file(path("fig3" + tag + ".csv"), fig3);

        nlohmann::ordered_json jfit;
        jfit["coefficients"] = report.alpha_fit_quartic.coeffs;
        jfit["rms_residual"] = report.alpha_fit_quartic.rms_residual;
        write_file(path("fig3" + tag + "_fit.json"), jfit.dump(2) + "\n");

        // reconstructed PPD against the convolved model at the fitted alpha
        std::string fig4 = "alpha_fit";
        for (int k = 0; k <= plan.reconstruct_k_max; ++k)
            fig4 += ",p" + std::to_string(k);
        for (int k = 0; k <= plan.reconstruct_k_max; ++k)
            fig4 += ",model_p" + std::to_string(k);
        fig4 += '\n';
        for (const PipelinePoint& p : report.points) {
            std::map<int, PhononDistribution> pure;
            for (int m = 0; m <= report.rho0_hat.diag.k_max(); ++m)
                if (report.rho0_hat.diag.probs[m] > 0.0)
                    pure.emplace(m, dns_ppd({m, {p.alpha_fit, 0.0}}, plan.reconstruct_k_max));
            const PhononDistribution model = convolve_preparation(pure, report.rho0_hat);
            fig4 += format_double(p.alpha_fit);
            for (double pk : p.reconstruction.ppd.probs) fig4 += "," + format_double(pk);
            for (double pk : model.probs) fig4 += "," + format_double(pk);
            fig4 += '\n';
        }
        write_file(path("fig4" + tag + ".csv"), fig4);

        std::string raw =
            "v_k,alpha_sim,alpha_integral,e_f_quanta,alpha_fit,fit_residual,"
            "truth_tail_mass,truth_mass_beyond_reconstruction,log_likelihood,converged\n";
        for (std::size_t i = 0; i < report.points.size(); ++i) {
            const PipelinePoint& p = report.points[i];
            raw += format_double(p.v_k) + "," + format_double(p.alpha_sim) + "," +
                   format_double(p.alpha_integral) + "," +
                   format_double(sweep.rows[i].energy_quanta) + "," +
                   format_double(p.alpha_fit) + "," + format_double(p.fit_residual) + "," +
                   format_double(p.truth_tail_mass) + "," +
                   format_double(p.truth_mass_beyond_reconstruction) + "," +
                   format_double(p.reconstruction.log_likelihood) + "," +
                   (p.reconstruction.converged ? "1" : "0") + '\n';
        }
        write_file(path("raw" + tag + ".csv"), raw);

        report.files = {"fig2" + tag + ".csv", "fig3" + tag + ".csv",
                        "fig3" + tag + "_fit.json", "fig4" + tag + ".csv",
                        "raw" + tag + ".csv"};
        report.complete = true;

        nlohmann::ordered_json manifest;
        manifest["seed"] = plan.seed;
        manifest["preparation_n"] = plan.preparation_n;
        manifest["complete"] = report.complete;
        manifest["files"] = nlohmann::ordered_json::array();
        const char* roles[] = {"fig2", "fig3", "fig3", "fig4", "raw"};
        for (std::size_t i = 0; i < report.files.size(); ++i)
            manifest["files"].push_back({{"path", report.files[i]}, {"role", roles[i]}});
        write_file(path("manifest" + tag + ".json"), manifest.dump(2) + "\n");
        report.files.push_back("manifest" + tag + ".json");
    } catch (const std::exception& e) {
        stage_fail("emit-tables", e);
    }
    return report;
}

} // namespace dnslab
