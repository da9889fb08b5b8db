#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dnslab/fock.hpp"

namespace dnslab {

// Coupling and readout parameters of the analysis pulse.
struct CouplingConfig {
    double eta = 0.21;             // Lamb-Dicke factor, in (0, 1)
    double readout_fidelity = 1.0; // in (0.5, 1]
    double bare_rabi = 1.0;        // rad of pulse area per second, for time-stamped data
    double contrast_decay = 0.0;   // optional exponential contrast envelope rate per rad;
                                   // defaults off, the printed signal model has none

    void validate() const;
};

struct RabiPoint {
    double theta = 0.0; // pulse area, rad
    int shots = 0;
    int up_counts = 0;
};

struct RabiBranch {
    int delta_n = 0; // -1 red sideband, 0 carrier, +1 blue sideband
    std::vector<RabiPoint> points;
};

// Three-branch Rabi dataset with the synthesis metadata carried by the JSON
// serialization form.
struct RabiDataset {
    std::array<RabiBranch, 3> branches{RabiBranch{-1, {}}, RabiBranch{0, {}}, RabiBranch{+1, {}}};
    double eta = 0.0;      // 0 when unknown (e.g. bare CSV input)
    std::uint64_t seed = 0;

    RabiBranch& branch(int delta_n);
    const RabiBranch& branch(int delta_n) const;

    // theta grids strictly increasing, 0 <= up_counts <= shots
    void validate() const;
};

// Lamb-Dicke coupling ratio M_{k, dn} between the bare and the
// motional-state-dependent Rabi frequency:
//
//   M = exp(-eta^2/2) eta^|dn| sqrt(n_<! / n_>!) L_{n_<}^{(|dn|)}(eta^2)
//
// with n_< = min(k, k+dn), n_> = max(k, k+dn). Red-sideband drive out of
// k = 0 returns 0. Only |dn| <= 1 is accepted.
double matrix_element(int k, int delta_n, double eta);

// Rabi oscillation signal at pulse area theta on branch delta_n:
//   P = 1/2 sum_k p_k (1 + cos(M_{k,dn} theta)),
// remapped by the readout fidelity f to  f P + (1 - f)(1 - P).
// Rejects PPDs that are not normalized within 1e-6.
double rabi_signal(const PhononDistribution& ppd, int delta_n, double theta,
                   const CouplingConfig& config);

// Seeded forward model: binomial shot counts at every (branch, theta) point.
// Identical seeds give identical datasets.
RabiDataset synthesize_dataset(const PhononDistribution& ppd, const CouplingConfig& config,
                               const std::vector<double>& theta_grid, int shots,
                               std::uint64_t seed);

// pulse area from wall-clock pulse duration
inline double theta_from_time(double t_s, const CouplingConfig& config) {
    return config.bare_rabi * t_s;
}

// --- serialization ------------------------------------------------------
// CSV: header "branch,theta_rad,shots,up_counts", branches in order -1,0,1.
// JSON: same content plus eta / shots / seed metadata. Both round-trip
// bit-exactly.
std::string rabi_dataset_to_csv(const RabiDataset& data);
RabiDataset rabi_dataset_from_csv(const std::string& text);
std::string rabi_dataset_to_json(const RabiDataset& data);
RabiDataset rabi_dataset_from_json(const std::string& text);

} // namespace dnslab
