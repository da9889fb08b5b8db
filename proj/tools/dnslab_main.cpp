// dnslab command line: displaced-number-state generation, measurement and
// reconstruction pipeline on synthetic data.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dnslab/config.hpp"
#include "dnslab/fock.hpp"
#include "dnslab/kick.hpp"
#include "dnslab/pipeline.hpp"
#include "dnslab/semiclassics.hpp"
#include "dnslab/sideband.hpp"
#include "dnslab/tomography.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_file(const std::string& path, const std::string& text) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// emit to --out/<name> when an output directory is set, else to stdout
void emit(const std::string& out_dir, const std::string& name, const std::string& text) {
    if (out_dir.empty())
        std::cout << text;
    else
        write_file((std::filesystem::path(out_dir) / name).string(), text);
}

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    std::string format = "csv";
    std::uint64_t seed = 1;
};

dnslab::ExperimentConfig load_config(const CommonOptions& opts) {
    if (!opts.config_path.empty())
        return dnslab::load_config_file(opts.config_path);
    if (const char* env = std::getenv("DNSLAB_CONFIG"); env && *env)
        return dnslab::load_config_file(env);
    dnslab::ExperimentConfig config;
    config.validate();
    return config;
}

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path,
                    "config file (key=value or JSON); falls back to $DNSLAB_CONFIG");
    cmd->add_option("--seed", opts.seed, "seed for all randomized stages");
    cmd->add_option("--out", opts.out_dir, "output directory (stdout when omitted)");
    cmd->add_option("--format", opts.format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
}

std::string ppd_table(const dnslab::PhononDistribution& p, const std::string& format) {
    if (format == "json") {
        nlohmann::ordered_json j;
        j["probs"] = p.probs;
        j["truncated"] = p.truncated;
        j["tail_mass"] = p.tail_mass;
        return j.dump(2) + "\n";
    }
    std::string out = "k,p_k\n";
    for (std::size_t k = 0; k < p.probs.size(); ++k)
        out += std::to_string(k) + "," + fmt(p.probs[k]) + "\n";
    return out;
}

std::string reconstruction_json(const dnslab::ReconstructionResult& r,
                                const dnslab::BootstrapErrors* boot) {
    nlohmann::ordered_json j;
    j["ppd"] = r.ppd.probs;
    j["k_max"] = r.ppd.k_max();
    j["readout_fidelity"] = r.readout_fidelity;
    j["rabi_scale"] = r.rabi_scale;
    j["log_likelihood"] = r.log_likelihood;
    j["converged"] = r.converged;
    j["restart_spread"] = r.restart_spread;
    j["iterations"] = r.iterations;
    j["identifiability_warning"] = r.identifiability_warning;
    j["warning"] = r.warning;
    if (boot) {
        j["bootstrap_stderr"] = boot->stderr_per_k;
        j["bootstrap_resamples"] = boot->resamples;
        j["bootstrap_nonconverged"] = boot->nonconverged;
    }
    return j.dump(2) + "\n";
}

dnslab::RabiDataset load_dataset(const std::string& path) {
    const std::string text = read_file(path);
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
        return c == '{' ? dnslab::rabi_dataset_from_json(text)
                        : dnslab::rabi_dataset_from_csv(text);
    }
    throw std::runtime_error("empty dataset file '" + path + "'");
}

dnslab::PhononDistribution ppd_from_json_file(const std::string& path) {
    const nlohmann::json j = nlohmann::json::parse(read_file(path));
    std::vector<double> probs;
    if (j.is_array())
        probs = j.get<std::vector<double>>();
    else if (j.contains("ppd"))
        probs = j.at("ppd").get<std::vector<double>>();
    else if (j.contains("probs"))
        probs = j.at("probs").get<std::vector<double>>();
    else
        throw std::runtime_error("no PPD found in '" + path + "'");
    return dnslab::PhononDistribution::normalized(std::move(probs));
}

// truth PPD for a preparation: pure |alpha, n> weights convolved with the
// imperfect-preparation density
dnslab::PhononDistribution truth_ppd(int n, double alpha, double fidelity, int k_max) {
    const dnslab::DiagonalDensity rho0 = dnslab::preparation_density(n, fidelity, k_max);
    std::map<int, dnslab::PhononDistribution> pure;
    for (int m = 0; m <= rho0.diag.k_max(); ++m)
        if (rho0.diag.probs[m] > 0.0)
            pure.emplace(m, dnslab::dns_ppd({m, {alpha, 0.0}}, k_max));
    return dnslab::convolve_preparation(pure, rho0);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"displaced-number-state kick, measurement and reconstruction toolkit"};
    app.require_subcommand(1);

    CommonOptions opts;

    // --- ppd ---------------------------------------------------------------
    auto* cmd_ppd = app.add_subcommand("ppd", "phonon probability distribution tables");
    int ppd_n = 1;
    double ppd_alpha = 1.0;
    int ppd_kmax = 6;
    double ppd_fidelity = -1.0;
    add_common(cmd_ppd, opts);
    cmd_ppd->add_option("--n", ppd_n, "preparation Fock number");
    cmd_ppd->add_option("--alpha", ppd_alpha, "|alpha|");
    cmd_ppd->add_option("--kmax", ppd_kmax, "highest Fock index");
    cmd_ppd->add_option("--fidelity", ppd_fidelity,
                        "convolve with the imperfect-preparation density at this fidelity");

    // --- kick --------------------------------------------------------------
    auto* cmd_kick = app.add_subcommand("kick", "single kick simulation");
    double kick_voltage = -1.0;
    add_common(cmd_kick, opts);
    cmd_kick->add_option("--voltage", kick_voltage, "kick voltage (default from config)");

    // --- sweep -------------------------------------------------------------
    auto* cmd_sweep = app.add_subcommand("sweep", "alpha versus kick voltage");
    std::vector<double> sweep_voltages;
    add_common(cmd_sweep, opts);
    cmd_sweep->add_option("--voltages", sweep_voltages,
                          "voltage list (default 0..2 V in 200 mV steps)");

    // --- synth -------------------------------------------------------------
    auto* cmd_synth = app.add_subcommand("synth", "synthesize a Rabi dataset");
    int synth_n = 1;
    double synth_alpha = 1.0;
    double synth_fidelity = -1.0;
    add_common(cmd_synth, opts);
    cmd_synth->add_option("--n", synth_n, "preparation Fock number");
    cmd_synth->add_option("--alpha", synth_alpha, "|alpha|");
    cmd_synth->add_option("--fidelity", synth_fidelity,
                          "preparation fidelity (default from the measured table)");

    // --- fit ---------------------------------------------------------------
    auto* cmd_fit = app.add_subcommand("fit", "maximum-likelihood reconstruction");
    std::string fit_data_path;
    int fit_kmax = 6;
    int fit_bootstrap = 0;
    add_common(cmd_fit, opts);
    cmd_fit->add_option("--data", fit_data_path, "RabiDataset CSV or JSON")->required();
    cmd_fit->add_option("--kmax", fit_kmax, "reconstruction k_max");
    cmd_fit->add_option("--bootstrap", fit_bootstrap, "parametric bootstrap resamples (>= 50)");

    // --- alpha -------------------------------------------------------------
    auto* cmd_alpha = app.add_subcommand("alpha", "extract |alpha| from a reconstructed PPD");
    std::string alpha_ppd_path, alpha_rho0_path;
    int alpha_n = 0;
    add_common(cmd_alpha, opts);
    cmd_alpha->add_option("--ppd", alpha_ppd_path, "reconstructed PPD JSON")->required();
    cmd_alpha->add_option("--rho0", alpha_rho0_path, "zero-kick PPD JSON")->required();
    cmd_alpha->add_option("--n", alpha_n, "preparation Fock number");

    // --- semiclassics ------------------------------------------------------
    auto* cmd_semi = app.add_subcommand("semiclassics",
                                        "semiclassical versus exact interference minima");
    std::vector<std::string> semi_pairs = {"1,1", "2,2", "1,2", "2,3"};
    add_common(cmd_semi, opts);
    cmd_semi->add_option("--pairs", semi_pairs, "n,k pairs");

    // --- pipeline ----------------------------------------------------------
    auto* cmd_pipe = app.add_subcommand("pipeline", "full kick/measure/reconstruct pipeline");
    std::vector<int> pipe_ns = {0, 1, 2};
    std::vector<double> pipe_voltages;
    add_common(cmd_pipe, opts);
    cmd_pipe->add_option("--n", pipe_ns, "preparation Fock numbers");
    cmd_pipe->add_option("--voltages", pipe_voltages,
                         "voltage list (default 0..2 V in 200 mV steps)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        const dnslab::ExperimentConfig config = load_config(opts);

        if (cmd_ppd->parsed()) {
            if (ppd_fidelity >= 0.0) {
                emit(opts.out_dir, "ppd.csv",
                     ppd_table(truth_ppd(ppd_n, ppd_alpha, ppd_fidelity, ppd_kmax), opts.format));
            } else {
                emit(opts.out_dir, "ppd.csv",
                     ppd_table(dnslab::dns_ppd({ppd_n, {ppd_alpha, 0.0}}, ppd_kmax), opts.format));
            }
        } else if (cmd_kick->parsed()) {
            const dnslab::TrapModel trap = dnslab::calibrate_gaussian_trap(config.trap_anchors());
            const double v = kick_voltage >= 0.0 ? kick_voltage : config.kick_voltage_v;
            const dnslab::Waveform drive = config.kick_settings().build_filtered_kick(v);
            const dnslab::KickResult kick = dnslab::integrate_eom(
                trap, trap.holding_voltage, drive, drive.duration(), config.steps_per_period);
            nlohmann::ordered_json j;
            j["v_k"] = v;
            j["alpha_abs_energy"] = kick.alpha_energy();
            j["alpha_abs_integral"] = std::abs(kick.alpha);
            j["e_f_quanta"] = kick.final_energy_quanta;
            j["method_gap"] = kick.method_gap();
            emit(opts.out_dir, "kick.json", j.dump(2) + "\n");
        } else if (cmd_sweep->parsed()) {
            const dnslab::TrapModel trap = dnslab::calibrate_gaussian_trap(config.trap_anchors());
            std::vector<double> vs = sweep_voltages;
            if (vs.empty())
                for (int i = 0; i <= 10; ++i) vs.push_back(0.2 * i);
            const dnslab::SweepResult sweep =
                dnslab::sweep_alpha_vs_voltage(trap, config.kick_settings(), vs);
            std::string csv = "v_k,alpha_abs,e_f_quanta\n";
            for (const dnslab::SweepRow& r : sweep.rows)
                csv += fmt(r.v_k) + "," + fmt(r.alpha_abs) + "," + fmt(r.energy_quanta) + "\n";
            nlohmann::ordered_json jq;
            jq["coefficients"] = sweep.fit.coeffs;
            jq["rms_residual"] = sweep.fit.rms_residual;
            if (opts.format == "json") {
                nlohmann::ordered_json j;
                j["rows"] = nlohmann::ordered_json::array();
                for (const dnslab::SweepRow& r : sweep.rows)
                    j["rows"].push_back({{"v_k", r.v_k},
                                         {"alpha_abs", r.alpha_abs},
                                         {"e_f_quanta", r.energy_quanta}});
                j["quartic_fit"] = jq;
                emit(opts.out_dir, "sweep.json", j.dump(2) + "\n");
            } else {
                emit(opts.out_dir, "sweep.csv", csv);
                emit(opts.out_dir, "sweep_fit.json", jq.dump(2) + "\n");
            }
        } else if (cmd_synth->parsed()) {
            const double fidelity = synth_fidelity >= 0.0
                                        ? synth_fidelity
                                        : dnslab::default_preparation_fidelity(synth_n);
            const dnslab::PhononDistribution truth =
                truth_ppd(synth_n, synth_alpha, fidelity, config.truth_k_max);
            const dnslab::RabiDataset data = dnslab::synthesize_dataset(
                truth, config.coupling(), config.theta_grid(), config.shots, opts.seed);
            if (opts.format == "json")
                emit(opts.out_dir, "dataset.json", dnslab::rabi_dataset_to_json(data));
            else
                emit(opts.out_dir, "dataset.csv", dnslab::rabi_dataset_to_csv(data));
        } else if (cmd_fit->parsed()) {
            const dnslab::RabiDataset data = load_dataset(fit_data_path);
            dnslab::ReconstructionConfig rc;
            rc.k_max = fit_kmax;
            rc.seed = opts.seed;
            rc.eta = config.eta;
            rc.restarts = config.restarts;
            rc.readout_fidelity = std::min(config.readout_fidelity, 1.0 - 1e-6);
            const dnslab::ReconstructionResult result = dnslab::reconstruct(data, rc);
            if (fit_bootstrap > 0) {
                const dnslab::BootstrapErrors boot =
                    dnslab::bootstrap_errors(data, rc, fit_bootstrap);
                emit(opts.out_dir, "fit.json", reconstruction_json(result, &boot));
            } else {
                emit(opts.out_dir, "fit.json", reconstruction_json(result, nullptr));
            }
            if (!result.converged)
                throw ConvergenceError("reconstruction did not converge");
        } else if (cmd_alpha->parsed()) {
            const dnslab::PhononDistribution ppd = ppd_from_json_file(alpha_ppd_path);
            const dnslab::DiagonalDensity rho0{ppd_from_json_file(alpha_rho0_path)};
            const dnslab::AlphaFit fit = dnslab::extract_alpha(ppd, alpha_n, rho0);
            nlohmann::ordered_json j;
            j["alpha_abs"] = fit.alpha_abs;
            j["residual"] = fit.residual;
            j["degenerate_minima"] = fit.degenerate_minima;
            if (fit.degenerate_minima) j["second_best_alpha"] = fit.second_best_alpha;
            emit(opts.out_dir, "alpha.json", j.dump(2) + "\n");
        } else if (cmd_semi->parsed()) {
            std::vector<dnslab::MinimaComparison> rows;
            for (const std::string& pair : semi_pairs) {
                int n = 0, k = 0;
                if (std::sscanf(pair.c_str(), "%d,%d", &n, &k) != 2)
                    throw std::invalid_argument("bad --pairs entry '" + pair + "'");
                for (const auto& row : dnslab::compare_minima(n, k, {0.0, 3.5}))
                    rows.push_back(row);
            }
            emit(opts.out_dir, "semiclassics.csv", dnslab::minima_table_csv(rows));
        } else if (cmd_pipe->parsed()) {
            if (opts.out_dir.empty())
                throw std::invalid_argument("pipeline requires --out");
            nlohmann::ordered_json files = nlohmann::ordered_json::array();
            for (int n : pipe_ns) {
                dnslab::ExperimentPlan plan =
                    dnslab::default_plan(n, config, opts.out_dir, opts.seed);
                if (!pipe_voltages.empty()) plan.v_k_list = pipe_voltages;
                const dnslab::PipelineReport report = dnslab::run_pipeline(plan);
                for (const std::string& f : report.files) {
                    // role from the table prefix: fig2 | fig3 | fig4 | raw | manifest
                    const std::string role = f.substr(0, f.find('_'));
                    files.push_back({{"path", f}, {"role", role}});
                }
                std::cout << "n=" << n << ": " << report.points.size()
                          << " voltages, max |alpha_fit - alpha_sim| = ";
                double worst = 0.0;
                for (const auto& p : report.points)
                    worst = std::max(worst, std::abs(p.alpha_fit - p.alpha_sim));
                std::cout << worst << "\n";
            }
            nlohmann::ordered_json manifest;
            manifest["seed"] = opts.seed;
            manifest["files"] = files;
            write_file((std::filesystem::path(opts.out_dir) / "manifest.json").string(),
                       manifest.dump(2) + "\n");
        }
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
