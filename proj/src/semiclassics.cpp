#include "dnslab/semiclassics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dnslab/constants.hpp"
#include "dnslab/fock.hpp"

namespace dnslab {

double PhaseSpaceBand::radius() const { return std::sqrt(2.0 * n + 1.0); }

namespace {

double center_distance(double alpha_abs) { return std::sqrt(2.0) * alpha_abs; }

// overlap (lens) area of two circles with radii r1, r2 and center distance d
double lens_area(double r1, double r2, double d) {
    if (d <= std::abs(r1 - r2))
        return kPi * std::min(r1, r2) * std::min(r1, r2); // one inside the other
    if (d >= r1 + r2)
        return 0.0;
    const double a1 = std::acos(std::clamp((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1), -1.0, 1.0));
    const double a2 = std::acos(std::clamp((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2), -1.0, 1.0));
    const double tri = 0.5 * std::sqrt(std::max(0.0, (-d + r1 + r2) * (d + r1 - r2) *
                                                         (d - r1 + r2) * (d + r1 + r2)));
    return r1 * r1 * a1 + r2 * r2 * a2 - tri;
}

void check_indices(int n, int k) {
    if (n < 0 || k < 0)
        throw std::invalid_argument("semiclassics: Fock indices must be nonnegative");
}

} // namespace

bool bands_intersect(int n, int k, double alpha_abs) {
    check_indices(n, k);
    const double r1 = std::sqrt(2.0 * n + 1.0);
    const double r2 = std::sqrt(2.0 * k + 1.0);
    const double d = center_distance(alpha_abs);
    return d > std::abs(r1 - r2) && d < r1 + r2;
}

double enclosed_area_phase(int n, int k, double alpha_abs) {
    check_indices(n, k);
    if (!(alpha_abs >= 0.0) || !std::isfinite(alpha_abs))
        throw std::invalid_argument("enclosed_area_phase: alpha must be finite");
    const double r1 = std::sqrt(2.0 * n + 1.0);
    const double r2 = std::sqrt(2.0 * k + 1.0);
    const double d = center_distance(alpha_abs);
    if (n == k && d == 0.0)
        return 0.0; // coincident trajectories
    if (d <= std::abs(r1 - r2) || d >= r1 + r2)
        throw std::domain_error("enclosed_area_phase: classically forbidden (bands do not cross)");
    // area between the trajectories: both disks minus twice their overlap
    return kPi * (r1 * r1 + r2 * r2) - 2.0 * lens_area(r1, r2, d);
}

namespace {

// Interference phase of the two overlap contributions: half the phase-space
// area jointly covered by the two band orbits. Relative to the raw
// between-trajectories area B this keeps the same monotone growth but spaces
// the quarter-wave crossings by a full 2 pi in B, which is what limits the
// minima count to n (the bare B/2 would double-count crossings, and n = 0
// bands would acquire spurious minima).
double interference_phase(int n, int k, double alpha_abs) {
    const double r12 = 2.0 * n + 1.0;
    const double r22 = 2.0 * k + 1.0;
    const double d = center_distance(alpha_abs);
    return 0.5 * (kPi * (r12 + r22) - lens_area(std::sqrt(r12), std::sqrt(r22), d));
}

} // namespace

double maslov_offset() {
    // fixed once by the exact n = 1, k = 1 zero at |alpha| = 1: the offset
    // shifts cos(phi + delta) so that zero lands on an odd multiple of pi/2
    static const double offset = [] {
        const double phi = interference_phase(1, 1, 1.0);
        double delta = 0.5 * kPi - std::fmod(phi, kPi);
        if (delta > 0.5 * kPi) delta -= kPi;
        if (delta <= -0.5 * kPi) delta += kPi;
        return delta;
    }();
    return offset;
}

std::vector<double> predict_minima(int n, int k, AlphaInterval range) {
    check_indices(n, k);
    if (!(range.hi > range.lo) || range.lo < 0.0)
        throw std::invalid_argument("predict_minima: bad alpha interval");

    const double r1 = std::sqrt(2.0 * n + 1.0);
    const double r2 = std::sqrt(2.0 * k + 1.0);
    const double eps = 1e-9;
    // clamp to the open intersecting regime
    const double lo = std::max(range.lo, std::abs(r1 - r2) / std::sqrt(2.0) + eps);
    const double hi = std::min(range.hi, (r1 + r2) / std::sqrt(2.0) - eps);
    if (!(hi > lo))
        return {};

    const double delta = maslov_offset();
    const auto g = [&](double a) { return std::cos(interference_phase(n, k, a) + delta); };

    std::vector<double> zeros;
    constexpr int kGrid = 2000;
    double a_prev = lo;
    double g_prev = g(a_prev);
    for (int i = 1; i <= kGrid; ++i) {
        const double a = lo + (hi - lo) * static_cast<double>(i) / kGrid;
        const double gi = g(a);
        if (g_prev == 0.0)
            zeros.push_back(a_prev);
        else if (g_prev * gi < 0.0) {
            double x0 = a_prev, x1 = a;
            double f0 = g_prev;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (x0 + x1);
                const double fm = g(mid);
                if (f0 * fm <= 0.0)
                    x1 = mid;
                else {
                    x0 = mid;
                    f0 = fm;
                }
                if (x1 - x0 < 1e-12) break;
            }
            zeros.push_back(0.5 * (x0 + x1));
        }
        a_prev = a;
        g_prev = gi;
    }
    return zeros;
}

std::vector<MinimaComparison> compare_minima(int n, int k, AlphaInterval range) {
    std::vector<MinimaComparison> rows;
    const std::vector<double> exact_x = ppd_zero_locations(n, k); // in |alpha|^2
    const std::vector<double> predicted = predict_minima(n, k, range);
    for (double x : exact_x) {
        const double a_exact = std::sqrt(x);
        if (a_exact < range.lo || a_exact > range.hi) continue;
        MinimaComparison row;
        row.n = n;
        row.k = k;
        row.alpha_exact = a_exact;
        double best = -1.0;
        for (double p : predicted)
            if (best < 0.0 || std::abs(p - a_exact) < std::abs(best - a_exact)) best = p;
        if (best < 0.0) continue; // no prediction in range
        row.alpha_semiclassical = best;
        row.relative_error = std::abs(best - a_exact) / a_exact;
        rows.push_back(row);
    }
    return rows;
}

std::string minima_table_csv(const std::vector<MinimaComparison>& rows) {
    std::string out = "n,k,alpha_min_semiclassical,alpha_min_exact,relative_error\n";
    char buf[160];
    for (const MinimaComparison& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.12g,%.12g,%.12g\n", r.n, r.k,
                      r.alpha_semiclassical, r.alpha_exact, r.relative_error);
        out += buf;
    }
    return out;
}

} // namespace dnslab
