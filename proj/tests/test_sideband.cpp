#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "dnslab/fock.hpp"
#include "dnslab/sideband.hpp"

using namespace dnslab;

namespace {

PhononDistribution pure_state(int n, int k_max) {
    std::vector<double> p(k_max + 1, 0.0);
    p[n] = 1.0;
    return PhononDistribution::normalized(std::move(p));
}

} // namespace

TEST_CASE("matrix_element limits and pinned value") {
    CHECK(matrix_element(0, 0, 0.0) == doctest::Approx(1.0)); // point-ion carrier
    CHECK(matrix_element(5, 0, 0.0) == doctest::Approx(1.0));
    CHECK(matrix_element(0, -1, 0.21) == 0.0); // no phonon to remove
    CHECK(matrix_element(0, 0, 0.21) == doctest::Approx(std::exp(-0.5 * 0.21 * 0.21)).epsilon(1e-13));
    CHECK_THROWS_AS(matrix_element(0, 2, 0.21), std::invalid_argument);
    CHECK_THROWS_AS(matrix_element(-1, 0, 0.21), std::invalid_argument);
}

TEST_CASE("matrix_element is symmetric across the k <-> k+1 transition") {
    for (int k = 0; k <= 8; ++k)
        CHECK(matrix_element(k, +1, 0.21) == doctest::Approx(matrix_element(k + 1, -1, 0.21)).epsilon(1e-14));
}

TEST_CASE("blue-sideband ladder matches the displacement-operator evaluation") {
    // coupling strengths are matrix elements of exp(i eta (a + a+)) = D(i eta)
    const double eta = 0.21;
    const Eigen::MatrixXcd d = displacement_operator_oracle({0.0, eta}, 64);
    const double base_num = std::abs(d(1, 0));
    const double base_ana = matrix_element(0, +1, eta);
    for (int k = 0; k <= 5; ++k) {
        const double ratio_ana = matrix_element(k, +1, eta) / base_ana;
        const double ratio_num = std::abs(d(k + 1, k)) / base_num;
        CHECK(ratio_ana == doctest::Approx(ratio_num).epsilon(1e-8));
    }
    // carrier elements against the oracle diagonal
    for (int k = 0; k <= 5; ++k)
        CHECK(matrix_element(k, 0, eta) == doctest::Approx(std::abs(d(k, k))).epsilon(1e-8));
}

TEST_CASE("rabi_signal trivial anchors") {
    CouplingConfig cfg;
    cfg.readout_fidelity = 1.0;
    const PhononDistribution ground = pure_state(0, 6);
    CHECK(rabi_signal(ground, 0, 0.0, cfg) == doctest::Approx(1.0));
    CHECK(rabi_signal(pure_state(3, 6), +1, 0.0, cfg) == doctest::Approx(1.0));
    for (double theta : {0.3, 1.7, 9.2})
        CHECK(rabi_signal(ground, -1, theta, cfg) == doctest::Approx(1.0)); // M_{0,-1} = 0
}

TEST_CASE("rabi_signal stays inside the fidelity-limited band") {
    CouplingConfig cfg;
    cfg.readout_fidelity = 0.83;
    const PhononDistribution p = dns_ppd({1, {1.1, 0.0}}, 40);
    for (double theta = 0.0; theta < 40.0; theta += 0.7) {
        const double s = rabi_signal(p, 0, theta, cfg);
        CHECK(s >= 1.0 - cfg.readout_fidelity - 1e-12);
        CHECK(s <= cfg.readout_fidelity + 1e-12);
    }
}

TEST_CASE("rabi_signal is affine in the PPD") {
    CouplingConfig cfg;
    cfg.readout_fidelity = 0.95;
    const PhononDistribution pa = dns_ppd({0, {0.8, 0.0}}, 40);
    const PhononDistribution pb = dns_ppd({2, {1.2, 0.0}}, 40);
    const double lam = 0.37;
    std::vector<double> mixed(41);
    for (int k = 0; k <= 40; ++k)
        mixed[k] = lam * pa.probs[k] + (1.0 - lam) * pb.probs[k];
    PhononDistribution pm;
    pm.probs = mixed;
    pm.truncated = true;
    pm.tail_mass = 1.0 - pm.sum();
    for (int dn : {-1, 0, 1})
        for (double theta : {0.5, 3.1, 17.0})
            CHECK(rabi_signal(pm, dn, theta, cfg) ==
                  doctest::Approx(lam * rabi_signal(pa, dn, theta, cfg) +
                                  (1.0 - lam) * rabi_signal(pb, dn, theta, cfg))
                      .epsilon(1e-12));
}

TEST_CASE("rabi_signal rejects unnormalized input") {
    PhononDistribution bad;
    bad.probs = {0.5, 0.4}; // sums to 0.9
    bad.truncated = true;
    bad.tail_mass = 0.1;
    CouplingConfig cfg;
    CHECK_THROWS_AS(rabi_signal(bad, 0, 1.0, cfg), std::invalid_argument);
}

TEST_CASE("carrier frequency recovered by a least-squares fit") {
    CouplingConfig cfg;
    cfg.readout_fidelity = 1.0;
    const PhononDistribution ground = pure_state(0, 4);
    const double m00 = matrix_element(0, 0, cfg.eta);
    std::vector<double> thetas, signal;
    for (int i = 0; i < 60; ++i) {
        thetas.push_back(0.25 * i);
        signal.push_back(rabi_signal(ground, 0, thetas.back(), cfg));
    }
    const auto misfit = [&](double w) {
        double r = 0.0;
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            const double model = 0.5 * (1.0 + std::cos(w * thetas[i]));
            r += (signal[i] - model) * (signal[i] - model);
        }
        return r;
    };
    double lo = 0.9 * m00, hi = 1.1 * m00;
    for (int it = 0; it < 200; ++it) {
        const double m1 = lo + 0.382 * (hi - lo);
        const double m2 = lo + 0.618 * (hi - lo);
        if (misfit(m1) < misfit(m2))
            hi = m2;
        else
            lo = m1;
    }
    CHECK(0.5 * (lo + hi) == doctest::Approx(m00).epsilon(1e-6));
}

TEST_CASE("synthesize_dataset is deterministic and respects exact probabilities") {
    const PhononDistribution truth = dns_ppd({1, {0.9, 0.0}}, 40);
    CouplingConfig cfg;
    cfg.readout_fidelity = 0.98;
    std::vector<double> grid;
    for (int i = 0; i < 15; ++i) grid.push_back(0.5 * i);

    const RabiDataset a = synthesize_dataset(truth, cfg, grid, 200, 42);
    const RabiDataset b = synthesize_dataset(truth, cfg, grid, 200, 42);
    const RabiDataset c = synthesize_dataset(truth, cfg, grid, 200, 43);
    bool identical = true, differs = false;
    for (int bi = 0; bi < 3; ++bi)
        for (std::size_t i = 0; i < grid.size(); ++i) {
            identical &= a.branches[bi].points[i].up_counts == b.branches[bi].points[i].up_counts;
            differs |= a.branches[bi].points[i].up_counts != c.branches[bi].points[i].up_counts;
        }
    CHECK(identical);
    CHECK(differs);

    // red sideband out of the ground state with perfect readout: P = 1 exactly
    CouplingConfig perfect;
    perfect.readout_fidelity = 1.0;
    const RabiDataset d = synthesize_dataset(pure_state(0, 6), perfect, grid, 100, 7);
    for (const RabiPoint& p : d.branch(-1).points)
        CHECK(p.up_counts == 100);
}

TEST_CASE("binomial counts concentrate at large shot numbers") {
    const PhononDistribution truth = dns_ppd({1, {1.0, 0.0}}, 40);
    CouplingConfig cfg;
    cfg.readout_fidelity = 0.95;
    std::vector<double> grid = {0.0, 1.3, 2.9, 6.1, 11.0, 17.3};
    const int shots = 1000000;
    const RabiDataset data = synthesize_dataset(truth, cfg, grid, shots, 2024);
    for (int dn : {-1, 0, 1}) {
        for (const RabiPoint& pt : data.branch(dn).points) {
            const double p = rabi_signal(truth, dn, pt.theta, cfg);
            const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / shots);
            CHECK(std::abs(static_cast<double>(pt.up_counts) / shots - p) <= 3.0 * se);
        }
    }
}

TEST_CASE("dataset CSV and JSON forms round-trip bit-exactly") {
    const PhononDistribution truth = dns_ppd({2, {1.37, 0.0}}, 40);
    CouplingConfig cfg;
    cfg.readout_fidelity = 0.97;
    std::vector<double> grid;
    for (int i = 0; i < 12; ++i) grid.push_back(1.234567890123 * i / 3.0);
    const RabiDataset data = synthesize_dataset(truth, cfg, grid, 200, 99);

    const std::string csv = rabi_dataset_to_csv(data);
    const RabiDataset from_csv = rabi_dataset_from_csv(csv);
    CHECK(rabi_dataset_to_csv(from_csv) == csv); // byte-identical re-serialization
    for (int bi = 0; bi < 3; ++bi)
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CHECK(from_csv.branches[bi].points[i].theta == data.branches[bi].points[i].theta);
            CHECK(from_csv.branches[bi].points[i].up_counts ==
                  data.branches[bi].points[i].up_counts);
        }

    const std::string json = rabi_dataset_to_json(data);
    const RabiDataset from_json = rabi_dataset_from_json(json);
    CHECK(rabi_dataset_to_json(from_json) == json);
    CHECK(from_json.eta == data.eta);
    CHECK(from_json.seed == data.seed);

    CHECK_THROWS_AS(rabi_dataset_from_csv("nonsense"), std::invalid_argument);
}

TEST_CASE("dataset validation catches malformed contents") {
    RabiDataset data;
    data.branch(0).points = {{1.0, 100, 50}, {0.5, 100, 10}}; // not increasing
    CHECK_THROWS_AS(data.validate(), std::invalid_argument);
    data.branch(0).points = {{0.5, 100, 101}}; // counts above shots
    CHECK_THROWS_AS(data.validate(), std::invalid_argument);
    CouplingConfig bad;
    bad.readout_fidelity = 0.4;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("theta_from_time applies the bare Rabi rate") {
    CouplingConfig cfg;
    cfg.bare_rabi = 2.0e5;
    CHECK(theta_from_time(1e-5, cfg) == doctest::Approx(2.0));
}
