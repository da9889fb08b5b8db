#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

namespace dnslab {

// Uniformly sampled time series; used for segment voltages U_B(t) (volts) and
// for tracked potential-minimum positions x_0(t) (meters).
struct Waveform {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<double> samples;

    double time_at(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
    double duration() const { return dt * (samples.empty() ? 0.0 : samples.size() - 1.0); }
    double value_at(double t) const; // linear interpolation, clamped outside the span
    void validate() const;
};

using VoltageWaveform = Waveform;

// Axial trap with Gaussian-well normalized segment potentials
//   V_i^(1V)(x) = -depth * exp(-(x - c_i)^2 / (2 width^2)),
// segment A (holding) centered at x = 0, segment B (kick) at segment_offset.
// The ion's potential energy is  charge * (U_A V_A^(1V) + U_B V_B^(1V)).
struct TrapModel {
    double mass = 0.0;            // kg
    double charge = 0.0;          // C
    double omega_ax = 0.0;        // rad/s, secular frequency of the holding well
    double segment_offset = 0.0;  // m
    double holding_voltage = 1.0; // V on segment A
    double well_depth = 0.0;      // V, Gaussian amplitude
    double well_width = 0.0;      // m

    double potential_1v(double x, double center) const;
    double gradient_1v(double x, double center) const;  // dV^(1V)/dx
    double curvature_1v(double x, double center) const; // d2V^(1V)/dx2

    // combined normalized potential weighted by the segment voltages
    double phi(double x, double u_a, double u_b) const;
    double phi_grad(double x, double u_a, double u_b) const;
    double phi_curv(double x, double u_a, double u_b) const;

    // axial electric field magnitude at x from 1 V on the kick segment
    double kick_field_per_volt(double x) const { return std::abs(gradient_1v(x, segment_offset)); }
};

// Published anchors the Gaussian model is pinned to.
struct TrapAnchors {
    double mass_kg;
    double charge_c;
    double omega_ax;         // rad/s
    double segment_offset_m; // kick segment center distance
    double field_per_volt;   // V/m at the well minimum for a 1 V kick voltage
    double holding_voltage_v = 1.0;
    double tolerance = 0.01; // anchor verification band
};

// Direct construction from explicit Gaussian parameters.
TrapModel gaussian_segment_model(double depth_scale, double width, std::array<double, 2> centers,
                                 const TrapAnchors& anchors);

// Calibration: solves for (depth_scale, width) such that the holding-well
// curvature reproduces omega_ax and 1 V on the kick segment produces
// field_per_volt at the well minimum. Failure to meet both constraints within
// the anchor tolerance is a reported error.
TrapModel calibrate_gaussian_trap(const TrapAnchors& anchors);

// Causal cascade of `order` identical one-pole low-pass stages at cutoff_hz,
// discretized sample-exactly for piecewise-constant inputs; DC gain is exactly
// one. Requires sample rate >= 20x cutoff.
Waveform lowpass_cascade(const Waveform& in, double cutoff_hz, int order);

// the two-stage filter used for the supply-line model
inline Waveform filter_waveform(const Waveform& in, double cutoff_hz) {
    return lowpass_cascade(in, cutoff_hz, 2);
}

// ideal rectangular kick: `voltage` between onset and onset+duration, 0 elsewhere
Waveform square_kick(double voltage, double onset_s, double duration_s, double dt_s,
                     double span_s);

// Per-sample axial minimum of the combined potential, seeded at the previous
// sample's minimum. Loss of a bracketed minimum is a reported error.
Waveform track_minimum(const TrapModel& trap, const Waveform& u_b, double u_a);

// Displacement from the minimum trajectory,
//   alpha(t) = -sqrt(m w / 2 hbar) exp(-i w t) Int_0^t dx0/dtau exp(i w tau) dtau,
// with the derivative by central differences (one-sided at the ends) and the
// trapezoid rule. The waveform must have settled before t_end.
std::complex<double> displace_alpha_integral(const Waveform& x0, const TrapModel& trap,
                                             double t_end);

struct KickResult {
    std::complex<double> alpha;      // from the phase-space integral
    double final_energy_quanta = 0;  // E_f / (hbar omega) about the final minimum
    double alpha_energy() const { return std::sqrt(final_energy_quanta); }
    // |alpha| agreement between the two extraction routes; expected < 0.02
    // when the harmonic picture holds (desk-scale kicks)
    double method_gap() const { return std::abs(std::abs(alpha) - alpha_energy()); }

    std::vector<double> traj_t, traj_x, traj_v; // sampled at the waveform grid
};

// Classical equation of motion
//   m x.. = -e U_A dV_A^(1V)/dx - e U_B(t) dV_B^(1V)/dx
// integrated by fixed-step RK4 from rest at the initial minimum, with linear
// interpolation of U_B between samples. Before the driven run an energy-drift
// guard integrates the frozen potential for 100 periods and halves the step
// until the relative drift is below 1e-6 (bounded retries). The final energy
// is measured about the final minimum and cross-checked against the
// phase-space integral on the tracked minimum.
KickResult integrate_eom(const TrapModel& trap, double u_a, const Waveform& u_b,
                         double t_span, int steps_per_period);

// Relative energy drift of the RK4 integrator over `periods` oscillations in
// the static potential (u_b frozen), at a small probe amplitude. This is the
// quantity the drift guard in integrate_eom thresholds at 1e-6 per 100
// periods.
double static_energy_drift(const TrapModel& trap, double u_a, double u_b,
                           double periods, int steps_per_period);

// Electric-field-noise heating rate  e^2 S_E(omega) / (4 m hbar omega),
// in quanta per second. S_E in V^2 / (Hz m^2).
double heating_rate_from_noise(double field_noise_psd, const TrapModel& trap);

struct SweepRow {
    double v_k = 0.0;
    double alpha_abs = 0.0;       // energy route, sqrt(E_f')
    double energy_quanta = 0.0;
    double alpha_integral = 0.0;  // |alpha| from the phase-space integral
};

struct QuarticFit {
    std::array<double, 4> coeffs{}; // c1 v + c2 v^2 + c3 v^3 + c4 v^4 (through the origin)
    double rms_residual = 0.0;
    double eval(double v) const {
        return ((coeffs[3] * v + coeffs[2]) * v + coeffs[1]) * v * v + coeffs[0] * v;
    }
};

struct SweepResult {
    std::vector<SweepRow> rows;
    QuarticFit fit;
};

// Kick shape and integration settings shared by sweep and pipeline runs.
struct KickSettings {
    double kick_duration_s = 400e-9;
    double kick_onset_s = 200e-9;
    double sample_dt_s = 2e-9;
    double span_s = 16e-6;
    double filter_cutoff_hz = 300e3;
    int filter_order = 5; // supply-chain poles; 2 reproduces the bare two-stage filter
    int steps_per_period = 256;

    Waveform build_filtered_kick(double voltage) const;
    void validate() const;
};

// alpha versus kick voltage, one EOM run per entry, plus a degree-4
// polynomial fit through the origin.
SweepResult sweep_alpha_vs_voltage(const TrapModel& trap, const KickSettings& settings,
                                   const std::vector<double>& v_list);

// quartic-through-origin least squares on (v, value) pairs
QuarticFit fit_quartic_through_origin(const std::vector<double>& v,
                                      const std::vector<double>& value);

// --- waveform file I/O ----------------------------------------------------
// CSV with header "t_s,volts"; uniform spacing is validated on load.
std::string waveform_to_csv(const Waveform& w);
Waveform waveform_from_csv(const std::string& text);

} // namespace dnslab
