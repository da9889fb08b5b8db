#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dnslab/kick.hpp"
#include "dnslab/sideband.hpp"

namespace dnslab {

// Experiment configuration, shared between the kick simulator and the CLI.
// Serialized either as "key = value" lines ('#' comments) or as a JSON object
// with the same keys. All keys are optional; unknown keys are rejected.
struct ExperimentConfig {
    // trap
    double mass_amu = 39.9625909; // Ca-40
    double omega_ax_hz = 1.35e6;  // axial secular frequency
    double segment_offset_m = 280e-6;
    double field_per_volt = 600.0; // axial field at the well per kick volt
    double holding_voltage_v = 1.0;

    // coupling / readout
    double eta = 0.21;
    double readout_fidelity = 0.98;

    // kick drive
    double kick_voltage_v = 2.0;
    double kick_duration_s = 400e-9;
    double kick_onset_s = 200e-9;
    double sample_dt_s = 2e-9;
    double span_s = 16e-6;
    double filter_cutoff_hz = 300e3;
    int filter_order = 5;
    int steps_per_period = 256;

    // measurement and reconstruction defaults
    int shots = 200;
    int theta_points = 40;
    double theta_span_blue_periods = 2.0; // grid span in blue-sideband periods
    int reconstruct_k_max = 6;
    int truth_k_max = 40;
    int restarts = 8;

    TrapAnchors trap_anchors() const;
    KickSettings kick_settings() const;
    CouplingConfig coupling() const;

    // theta grid implied by the coupling: `theta_points` samples from 0 to
    // theta_span_blue_periods blue-sideband periods
    std::vector<double> theta_grid() const;

    void validate() const;
};

ExperimentConfig config_from_keyvalue(const std::string& text);
ExperimentConfig config_from_json(const std::string& text);
// dispatch on leading '{' (JSON) versus key-value text
ExperimentConfig load_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string config_to_keyvalue(const ExperimentConfig& config);

} // namespace dnslab
