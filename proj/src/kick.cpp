#include "dnslab/kick.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "dnslab/constants.hpp"

namespace dnslab {

void Waveform::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw std::invalid_argument("Waveform: dt must be positive");
    if (samples.size() < 2)
        throw std::invalid_argument("Waveform: needs at least two samples");
    for (double s : samples)
        if (!std::isfinite(s))
            throw std::invalid_argument("Waveform: non-finite sample");
}

double Waveform::value_at(double t) const {
    const double u = (t - t0) / dt;
    if (u <= 0.0) return samples.front();
    const std::size_t last = samples.size() - 1;
    if (u >= static_cast<double>(last)) return samples.back();
    const std::size_t i = static_cast<std::size_t>(u);
    const double frac = u - static_cast<double>(i);
    return samples[i] * (1.0 - frac) + samples[i + 1] * frac;
}

double TrapModel::potential_1v(double x, double center) const {
    const double u = (x - center) / well_width;
    return -well_depth * std::exp(-0.5 * u * u);
}

double TrapModel::gradient_1v(double x, double center) const {
    const double u = (x - center) / well_width;
    return well_depth * (u / well_width) * std::exp(-0.5 * u * u);
}

double TrapModel::curvature_1v(double x, double center) const {
    const double u = (x - center) / well_width;
    return well_depth / (well_width * well_width) * (1.0 - u * u) * std::exp(-0.5 * u * u);
}

double TrapModel::phi(double x, double u_a, double u_b) const {
    return u_a * potential_1v(x, 0.0) + u_b * potential_1v(x, segment_offset);
}

double TrapModel::phi_grad(double x, double u_a, double u_b) const {
    return u_a * gradient_1v(x, 0.0) + u_b * gradient_1v(x, segment_offset);
}

double TrapModel::phi_curv(double x, double u_a, double u_b) const {
    return u_a * curvature_1v(x, 0.0) + u_b * curvature_1v(x, segment_offset);
}

TrapModel gaussian_segment_model(double depth_scale, double width, std::array<double, 2> centers,
                                 const TrapAnchors& anchors) {
    if (!(width > 0.0))
        throw std::invalid_argument("gaussian_segment_model: width must be positive");
    if (!(depth_scale > 0.0))
        throw std::invalid_argument("gaussian_segment_model: depth_scale must be positive");
    if (!(anchors.holding_voltage_v > 0.0))
        throw std::invalid_argument("gaussian_segment_model: holding voltage must be positive");

    TrapModel trap;
    trap.mass = anchors.mass_kg;
    trap.charge = anchors.charge_c;
    trap.segment_offset = centers[1] - centers[0]; // coordinates with segment A at 0
    trap.holding_voltage = anchors.holding_voltage_v;
    trap.well_depth = depth_scale;
    trap.well_width = width;
    // secular frequency of the constructed holding well
    const double curv = trap.charge * trap.holding_voltage * trap.curvature_1v(0.0, 0.0);
    trap.omega_ax = std::sqrt(curv / trap.mass);
    return trap;
}

TrapModel calibrate_gaussian_trap(const TrapAnchors& anchors) {
    if (!(anchors.mass_kg > 0.0) || !(anchors.charge_c > 0.0) || !(anchors.omega_ax > 0.0) ||
        !(anchors.segment_offset_m > 0.0) || !(anchors.field_per_volt > 0.0))
        throw std::invalid_argument("calibrate_gaussian_trap: anchors must be positive");

    // curvature anchor fixes depth/width^2; the field anchor then fixes the
    // width through exp(-d^2 / 2 w^2) = E q U_A / (m w_ax^2 d)
    const double curv_per_volt =
        anchors.mass_kg * anchors.omega_ax * anchors.omega_ax /
        (anchors.charge_c * anchors.holding_voltage_v);
    const double ratio = anchors.field_per_volt /
                         (curv_per_volt * anchors.holding_voltage_v * anchors.segment_offset_m);
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::runtime_error(
            "calibrate_gaussian_trap: no Gaussian well meets both anchors "
            "(field anchor outside the reachable range)");

    const double width = anchors.segment_offset_m / std::sqrt(2.0 * std::log(1.0 / ratio));
    const double depth = curv_per_volt * anchors.holding_voltage_v * width * width;
    TrapModel trap =
        gaussian_segment_model(depth, width, {0.0, anchors.segment_offset_m}, anchors);

    // verify both anchors within tolerance; failure is reported, never patched
    const double omega_err = std::abs(trap.omega_ax - anchors.omega_ax) / anchors.omega_ax;
    const double field = trap.kick_field_per_volt(0.0);
    const double field_err = std::abs(field - anchors.field_per_volt) / anchors.field_per_volt;
    if (omega_err > anchors.tolerance || field_err > anchors.tolerance)
        throw std::runtime_error("calibrate_gaussian_trap: anchor verification failed");
    trap.omega_ax = anchors.omega_ax; // exact by construction up to roundoff
    return trap;
}

Waveform lowpass_cascade(const Waveform& in, double cutoff_hz, int order) {
    in.validate();
    if (!(cutoff_hz > 0.0))
        throw std::invalid_argument("lowpass_cascade: cutoff must be positive");
    if (order < 1)
        throw std::invalid_argument("lowpass_cascade: order must be >= 1");
    if (1.0 / in.dt < 20.0 * cutoff_hz)
        throw std::invalid_argument("lowpass_cascade: input under-sampled (need >= 20x cutoff)");

    // one-pole stage, exact for inputs held constant over each sample interval:
    // y[i] = a y[i-1] + (1-a) x[i-1], a = exp(-2 pi fc dt). DC gain is 1.
    const double a = std::exp(-2.0 * kPi * cutoff_hz * in.dt);
    Waveform out = in;
    for (int stage = 0; stage < order; ++stage) {
        std::vector<double> y(out.samples.size());
        y[0] = out.samples[0];
        for (std::size_t i = 1; i < y.size(); ++i)
            y[i] = a * y[i - 1] + (1.0 - a) * out.samples[i - 1];
        out.samples = std::move(y);
    }
    return out;
}

Waveform square_kick(double voltage, double onset_s, double duration_s, double dt_s,
                     double span_s) {
    if (!(dt_s > 0.0) || !(span_s > dt_s))
        throw std::invalid_argument("square_kick: bad time grid");
    if (onset_s < 0.0 || duration_s < 0.0 || onset_s + duration_s > span_s)
        throw std::invalid_argument("square_kick: pulse outside the span");
    Waveform w;
    w.t0 = 0.0;
    w.dt = dt_s;
    const std::size_t n = static_cast<std::size_t>(std::floor(span_s / dt_s)) + 1;
    w.samples.resize(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = w.time_at(i);
        if (t >= onset_s && t < onset_s + duration_s)
            w.samples[i] = voltage;
    }
    return w;
}

namespace {

// stationary point of phi near `guess`; Newton with analytic curvature and an
// expanding-bracket bisection fallback
double find_minimum(const TrapModel& trap, double u_a, double u_b, double guess) {
    double x = guess;
    for (int it = 0; it < 60; ++it) {
        const double g = trap.phi_grad(x, u_a, u_b);
        const double c = trap.phi_curv(x, u_a, u_b);
        if (c <= 0.0) break; // wandered out of the convex region
        const double step = g / c;
        x -= step;
        if (std::abs(step) < 1e-16)
            break;
        if (std::abs(x - guess) > 4.0 * trap.well_width) break;
    }
    const double grad_scale = trap.well_depth / trap.well_width;
    const bool newton_ok = trap.phi_curv(x, u_a, u_b) > 0.0 &&
                           std::abs(trap.phi_grad(x, u_a, u_b)) < 1e-9 * grad_scale;
    if (newton_ok)
        return x;

    // bracket a sign change of the gradient around the guess
    double span = 0.05 * trap.well_width;
    for (int grow = 0; grow < 12; ++grow, span *= 2.0) {
        const double lo = guess - span;
        const double hi = guess + span;
        if (trap.phi_grad(lo, u_a, u_b) < 0.0 && trap.phi_grad(hi, u_a, u_b) > 0.0) {
            double a = lo, b = hi;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (a + b);
                if (trap.phi_grad(mid, u_a, u_b) < 0.0)
                    a = mid;
                else
                    b = mid;
            }
            const double xr = 0.5 * (a + b);
            if (trap.phi_curv(xr, u_a, u_b) > 0.0)
                return xr;
            break;
        }
    }
    throw std::runtime_error("track_minimum: potential minimum lost (kick too large)");
}

} // namespace

Waveform track_minimum(const TrapModel& trap, const Waveform& u_b, double u_a) {
    u_b.validate();
    Waveform x0;
    x0.t0 = u_b.t0;
    x0.dt = u_b.dt;
    x0.samples.resize(u_b.samples.size());
    double prev = find_minimum(trap, u_a, u_b.samples[0], 0.0);
    for (std::size_t i = 0; i < u_b.samples.size(); ++i) {
        prev = find_minimum(trap, u_a, u_b.samples[i], prev);
        x0.samples[i] = prev;
    }
    return x0;
}

std::complex<double> displace_alpha_integral(const Waveform& x0, const TrapModel& trap,
                                             double t_end) {
    x0.validate();
    const std::size_t last = x0.samples.size() - 1;
    std::size_t m = static_cast<std::size_t>(std::llround((t_end - x0.t0) / x0.dt));
    if (m < 2 || m > last)
        throw std::invalid_argument("displace_alpha_integral: t_end outside the waveform");

    // dx0/dt by central differences, one-sided at the ends
    std::vector<double> xd(m + 1);
    xd[0] = (x0.samples[1] - x0.samples[0]) / x0.dt;
    for (std::size_t i = 1; i < m; ++i)
        xd[i] = (x0.samples[i + 1] - x0.samples[i - 1]) / (2.0 * x0.dt);
    xd[m] = (x0.samples[m] - x0.samples[m - 1]) / x0.dt;

    // settled-before-t_end guard: the tail slope must be negligible against
    // the peak slope (or zero throughout)
    double peak = 0.0;
    for (double v : xd) peak = std::max(peak, std::abs(v));
    const std::size_t tail_start = m - std::max<std::size_t>(2, m / 20);
    double tail = 0.0;
    for (std::size_t i = tail_start; i <= m; ++i) tail = std::max(tail, std::abs(xd[i]));
    if (peak > 0.0 && tail > 1e-5 * peak)
        throw std::runtime_error("displace_alpha_integral: waveform not settled before t_end");

    const double omega = trap.omega_ax;
    const std::complex<double> i_unit(0.0, 1.0);
    std::complex<double> integral(0.0, 0.0);
    std::complex<double> f_prev = xd[0]; // tau = 0 at the waveform origin
    for (std::size_t i = 1; i <= m; ++i) {
        const double tau = x0.dt * static_cast<double>(i);
        const std::complex<double> f = xd[i] * std::exp(i_unit * omega * tau);
        integral += 0.5 * (f_prev + f) * x0.dt;
        f_prev = f;
    }
    const double tend = x0.dt * static_cast<double>(m);
    const double prefactor = std::sqrt(trap.mass * omega / (2.0 * kHbar));
    return -prefactor * std::exp(-i_unit * omega * tend) * integral;
}

namespace {

struct State {
    double x;
    double v;
};

template <typename Force>
State rk4_step(const State& s, double t, double h, double mass, Force&& force) {
    const auto acc = [&](double x, double tt) { return force(x, tt) / mass; };
    const double k1x = s.v, k1v = acc(s.x, t);
    const double k2x = s.v + 0.5 * h * k1v, k2v = acc(s.x + 0.5 * h * k1x, t + 0.5 * h);
    const double k3x = s.v + 0.5 * h * k2v, k3v = acc(s.x + 0.5 * h * k2x, t + 0.5 * h);
    const double k4x = s.v + h * k3v, k4v = acc(s.x + h * k3x, t + h);
    return {s.x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            s.v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

} // namespace

double static_energy_drift(const TrapModel& trap, double u_a, double u_b, double periods,
                           int steps_per_period) {
    if (steps_per_period < 1 || !(periods > 0.0))
        throw std::invalid_argument("static_energy_drift: bad probe settings");
    const double period = 2.0 * kPi / trap.omega_ax;
    const double h = period / steps_per_period;
    const double x_rest = find_minimum(trap, u_a, u_b, 0.0);
    const auto force = [&](double x, double) {
        return -trap.charge * trap.phi_grad(x, u_a, u_b);
    };
    const auto energy = [&](const State& s) {
        return 0.5 * trap.mass * s.v * s.v +
               trap.charge * (trap.phi(s.x, u_a, u_b) - trap.phi(x_rest, u_a, u_b));
    };
    const double probe_offset = 4.0 * std::sqrt(kHbar / (2.0 * trap.mass * trap.omega_ax));
    State s{x_rest + probe_offset, 0.0};
    const double e0 = energy(s);
    const long nsteps = std::lround(periods * period / h);
    double t = 0.0;
    for (long i = 0; i < nsteps; ++i, t += h)
        s = rk4_step(s, t, h, trap.mass, force);
    return std::abs(energy(s) - e0) / e0;
}

KickResult integrate_eom(const TrapModel& trap, double u_a, const Waveform& u_b, double t_span,
                         int steps_per_period) {
    u_b.validate();
    if (steps_per_period < 64)
        throw std::invalid_argument("integrate_eom: steps_per_period must be >= 64");
    if (t_span <= 0.0 || t_span > u_b.duration() + 0.5 * u_b.dt)
        throw std::invalid_argument("integrate_eom: t_span outside the drive waveform");

    const double period = 2.0 * kPi / trap.omega_ax;
    double h = period / steps_per_period;

    // energy-drift guard on the frozen potential: probe 100 periods at a small
    // amplitude; halve the step until the relative drift is below 1e-6
    const double u_b0 = u_b.samples.front();
    const double x_rest = find_minimum(trap, u_a, u_b0, 0.0);
    bool guard_ok = false;
    for (int halving = 0; halving < 8; ++halving) {
        const int spp = static_cast<int>(std::lround(period / h));
        if (static_energy_drift(trap, u_a, u_b0, 100.0, spp) < 1e-6) {
            guard_ok = true;
            break;
        }
        h *= 0.5;
    }
    if (!guard_ok)
        throw std::runtime_error("integrate_eom: energy-drift guard failed after step refinement");

    // driven run, sample-aligned so the trajectory lands on the waveform grid
    const auto force = [&](double x, double t) {
        return -trap.charge * trap.phi_grad(x, u_a, u_b.value_at(t));
    };
    const std::size_t n_samples =
        std::min(u_b.samples.size(),
                 static_cast<std::size_t>(std::floor(t_span / u_b.dt)) + 1);
    const int n_sub = std::max(1, static_cast<int>(std::ceil(u_b.dt / h)));
    const double h_sub = u_b.dt / n_sub;

    KickResult result;
    result.traj_t.reserve(n_samples);
    result.traj_x.reserve(n_samples);
    result.traj_v.reserve(n_samples);
    State s{x_rest, 0.0};
    double t = u_b.t0;
    result.traj_t.push_back(t);
    result.traj_x.push_back(s.x);
    result.traj_v.push_back(s.v);
    for (std::size_t i = 1; i < n_samples; ++i) {
        for (int j = 0; j < n_sub; ++j) {
            s = rk4_step(s, t, h_sub, trap.mass, force);
            t += h_sub;
        }
        result.traj_t.push_back(t);
        result.traj_x.push_back(s.x);
        result.traj_v.push_back(s.v);
    }

    // secular energy about the final minimum
    const double u_b_end = u_b.samples[n_samples - 1];
    const double x_min_final = find_minimum(trap, u_a, u_b_end, s.x);
    const double e_f = 0.5 * trap.mass * s.v * s.v +
                       trap.charge * (trap.phi(s.x, u_a, u_b_end) -
                                      trap.phi(x_min_final, u_a, u_b_end));
    result.final_energy_quanta = e_f / (kHbar * trap.omega_ax);

    // cross-check through the phase-space integral on the tracked minimum
    const Waveform x0 = track_minimum(trap, u_b, u_a);
    result.alpha = displace_alpha_integral(x0, trap, t);
    return result;
}

double heating_rate_from_noise(double field_noise_psd, const TrapModel& trap) {
    if (field_noise_psd < 0.0 || !std::isfinite(field_noise_psd))
        throw std::invalid_argument("heating_rate_from_noise: PSD must be nonnegative");
    if (!(trap.mass > 0.0) || !(trap.omega_ax > 0.0))
        throw std::invalid_argument("heating_rate_from_noise: invalid trap");
    // quanta per second from field noise at the secular frequency
    return trap.charge * trap.charge * field_noise_psd /
           (4.0 * trap.mass * kHbar * trap.omega_ax);
}

void KickSettings::validate() const {
    if (!(kick_duration_s > 0.0) || !(sample_dt_s > 0.0) || !(span_s > 0.0))
        throw std::invalid_argument("KickSettings: durations must be positive");
    if (kick_onset_s < 0.0 || kick_onset_s + kick_duration_s > span_s)
        throw std::invalid_argument("KickSettings: pulse outside the span");
    if (!(filter_cutoff_hz > 0.0) || filter_order < 1)
        throw std::invalid_argument("KickSettings: bad filter settings");
    if (steps_per_period < 64)
        throw std::invalid_argument("KickSettings: steps_per_period must be >= 64");
}

Waveform KickSettings::build_filtered_kick(double voltage) const {
    validate();
    const Waveform ideal = square_kick(voltage, kick_onset_s, kick_duration_s, sample_dt_s, span_s);
    return lowpass_cascade(ideal, filter_cutoff_hz, filter_order);
}

QuarticFit fit_quartic_through_origin(const std::vector<double>& v,
                                      const std::vector<double>& value) {
    if (v.size() != value.size() || v.empty())
        throw std::invalid_argument("fit_quartic_through_origin: need matched nonempty points");
    Eigen::MatrixXd a(v.size(), 4);
    Eigen::VectorXd b(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = v[i];
        a(i, 0) = x;
        a(i, 1) = x * x;
        a(i, 2) = x * x * x;
        a(i, 3) = x * x * x * x;
        b(i) = value[i];
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
    QuarticFit fit;
    for (int j = 0; j < 4; ++j) fit.coeffs[j] = c(j);
    const Eigen::VectorXd r = a * c - b;
    fit.rms_residual = std::sqrt(r.squaredNorm() / static_cast<double>(v.size()));
    return fit;
}

SweepResult sweep_alpha_vs_voltage(const TrapModel& trap, const KickSettings& settings,
                                   const std::vector<double>& v_list) {
    if (v_list.empty())
        throw std::invalid_argument("sweep_alpha_vs_voltage: empty voltage list");
    SweepResult sweep;
    sweep.rows.reserve(v_list.size());
    for (double v : v_list) {
        const Waveform drive = settings.build_filtered_kick(v);
        const KickResult kick = integrate_eom(trap, trap.holding_voltage, drive,
                                              drive.duration(), settings.steps_per_period);
        sweep.rows.push_back({v, kick.alpha_energy(), kick.final_energy_quanta,
                              std::abs(kick.alpha)});
    }
    std::vector<double> vs, alphas;
    for (const SweepRow& r : sweep.rows) {
        vs.push_back(r.v_k);
        alphas.push_back(r.alpha_abs);
    }
    sweep.fit = fit_quartic_through_origin(vs, alphas);
    return sweep;
}

std::string waveform_to_csv(const Waveform& w) {
    char buf[96];
    std::string out = "t_s,volts\n";
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", w.time_at(i), w.samples[i]);
        out += buf;
    }
    return out;
}

Waveform waveform_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("t_s,volts", 0) != 0)
        throw std::invalid_argument("waveform_from_csv: missing header");
    std::vector<double> ts, vs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double t = 0.0, v = 0.0;
        if (std::sscanf(line.c_str(), "%lf,%lf", &t, &v) != 2)
            throw std::invalid_argument("waveform_from_csv: malformed row: " + line);
        ts.push_back(t);
        vs.push_back(v);
    }
    if (ts.size() < 2)
        throw std::invalid_argument("waveform_from_csv: needs at least two samples");
    Waveform w;
    w.t0 = ts.front();
    w.dt = (ts.back() - ts.front()) / static_cast<double>(ts.size() - 1);
    for (std::size_t i = 0; i < ts.size(); ++i)
        if (std::abs(ts[i] - (w.t0 + w.dt * i)) > 1e-6 * w.dt)
            throw std::invalid_argument("waveform_from_csv: non-uniform sample spacing");
    w.samples = std::move(vs);
    w.validate();
    return w;
}

} // namespace dnslab
