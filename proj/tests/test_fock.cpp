#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "dnslab/fock.hpp"

using namespace dnslab;
using cd = std::complex<double>;

namespace {

double poisson(double x, int k) {
    return std::exp(-x + k * std::log(x) - std::lgamma(k + 1.0));
}

} // namespace

TEST_CASE("dns_ppd collapses to the coherent-state Poisson distribution at n=0") {
    for (double a : {0.5, 1.3, 2.7}) {
        const PhononDistribution p = dns_ppd({0, {a, 0.0}}, 20);
        for (int k = 0; k <= 20; ++k)
            CHECK(p.probs[k] == doctest::Approx(poisson(a * a, k)).epsilon(1e-12));
    }
}

TEST_CASE("dns_ppd pinned values at n=1, alpha=1") {
    const PhononDistribution p = dns_ppd({1, {1.0, 0.0}}, 6);
    CHECK(p.probs[1] == 0.0); // the inner sum is 1 - 1, exactly
    CHECK(p.probs[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
}

TEST_CASE("dns_ppd at alpha=0 is a delta on the preparation number") {
    const PhononDistribution p = dns_ppd({3, {0.0, 0.0}}, 8);
    for (int k = 0; k <= 8; ++k)
        CHECK(p.probs[k] == (k == 3 ? 1.0 : 0.0));
}

TEST_CASE("dns_ppd input validation") {
    CHECK_THROWS_AS(dns_ppd({-1, {1.0, 0.0}}, 5), std::invalid_argument);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(dns_ppd({0, {inf, 0.0}}, 5), std::invalid_argument);
    CHECK_THROWS_AS(dns_ppd({0, {std::nan(""), 0.0}}, 5), std::invalid_argument);
    CHECK_THROWS_AS(dns_ppd({0, {1.0, 0.0}}, -1), std::invalid_argument);
}

TEST_CASE("dns_ppd depends on alpha only through its modulus") {
    const PhononDistribution p1 = dns_ppd({2, {1.7, 0.0}}, 12);
    const PhononDistribution p2 = dns_ppd({2, {-1.7, 0.0}}, 12);
    const PhononDistribution p3 = dns_ppd({2, {0.0, 1.7}}, 12);
    for (int k = 0; k <= 12; ++k) {
        CHECK(p1.probs[k] == p2.probs[k]);
        CHECK(p1.probs[k] == p3.probs[k]);
    }
}

TEST_CASE("dns_ppd normalizes to 1e-8 tail at k_max=40 for |alpha| <= 3") {
    for (int n = 0; n <= 3; ++n) {
        for (double a : {1.0, 2.0, 3.0}) {
            const PhononDistribution p = dns_ppd({n, {a, 0.0}}, 40);
            CHECK(p.truncated);
            CHECK(p.tail_mass < 1e-8);
            CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-8));
        }
    }
}

TEST_CASE("displacement operator oracle basics") {
    const Eigen::MatrixXcd id = displacement_operator_oracle({0.0, 0.0}, 16);
    CHECK((id - Eigen::MatrixXcd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-13);

    // coherent-state column: squared moduli of column 0 are Poisson
    const Eigen::MatrixXcd d = displacement_operator_oracle({1.2, 0.4}, 48);
    const double x = std::norm(cd(1.2, 0.4));
    for (int k = 0; k <= 12; ++k)
        CHECK(std::norm(d(k, 0)) == doctest::Approx(poisson(x, k)).epsilon(1e-10));

    // group inverse
    const Eigen::MatrixXcd dm = displacement_operator_oracle({-1.2, -0.4}, 48);
    CHECK((d * dm - Eigen::MatrixXcd::Identity(48, 48)).cwiseAbs().maxCoeff() < 1e-10);

    CHECK_THROWS_AS(displacement_operator_oracle({0.1, 0.0}, 1), std::invalid_argument);
}

TEST_CASE("oracle edge-mass guard flags undersized truncation") {
    const Eigen::MatrixXcd small = displacement_operator_oracle({2.5, 0.0}, 10);
    CHECK(oracle_column_edge_mass(small, 0, 2) > 1e-12);
    const Eigen::MatrixXcd big = displacement_operator_oracle({2.5, 0.0}, 64);
    CHECK(oracle_column_edge_mass(big, 0, 6) < 1e-12);
}

TEST_CASE("dns_ppd agrees with the truncated-operator oracle elementwise") {
    // module invariant: n <= 3, k <= 20, |alpha| <= 3, oracle dim 64
    std::mt19937_64 gen(7);
    for (int n = 0; n <= 3; ++n) {
        for (int ai = 0; ai <= 12; ++ai) {
            const double a = 3.0 * ai / 12.0;
            const double phase = 2.0 * 3.141592653589793 * ((gen() >> 11) * 0x1.0p-53);
            const cd alpha = std::polar(a, phase);
            const std::vector<double> oracle = oracle_ppd(alpha, n, 20, 64);
            const PhononDistribution direct = dns_ppd({n, alpha}, 20);
            for (int k = 0; k <= 20; ++k)
                CHECK(std::abs(direct.probs[k] - oracle[k]) < 1e-9);
        }
    }
}

TEST_CASE("convolve_preparation reduces to the pure PPD for delta weights") {
    std::map<int, PhononDistribution> pure;
    for (int m = 0; m <= 2; ++m)
        pure.emplace(m, dns_ppd({m, {0.9, 0.0}}, 14));
    std::vector<double> w(3, 0.0);
    w[1] = 1.0;
    DiagonalDensity rho0{PhononDistribution::normalized(w)};
    const PhononDistribution out = convolve_preparation(pure, rho0);
    for (int k = 0; k <= 14; ++k)
        CHECK(out.probs[k] == pure.at(1).probs[k]);
}

TEST_CASE("convolve_preparation at alpha=0 returns the preparation density itself") {
    // 0.92 on the target state, the remainder one level up
    std::map<int, PhononDistribution> pure;
    for (int m = 0; m <= 1; ++m)
        pure.emplace(m, dns_ppd({m, {0.0, 0.0}}, 6));
    DiagonalDensity rho0{PhononDistribution::normalized({0.92, 0.08, 0, 0, 0, 0, 0})};
    const PhononDistribution out = convolve_preparation(pure, rho0);
    CHECK(out.probs[0] == doctest::Approx(0.92).epsilon(1e-14));
    CHECK(out.probs[1] == doctest::Approx(0.08).epsilon(1e-14));
}

TEST_CASE("convolution lifts the pure-state zero when off-target weight exists") {
    std::map<int, PhononDistribution> pure;
    for (int m = 0; m <= 1; ++m)
        pure.emplace(m, dns_ppd({m, {1.0, 0.0}}, 8));
    DiagonalDensity rho0{PhononDistribution::normalized({0.23, 0.77, 0, 0, 0, 0, 0, 0, 0})};
    const PhononDistribution out = convolve_preparation(pure, rho0);
    CHECK(pure.at(1).probs[1] == 0.0);       // pure zero at k=1
    CHECK(out.probs[1] > 0.0);               // strictly lifted by the |0> admixture
    CHECK(out.probs[1] == doctest::Approx(0.23 * pure.at(0).probs[1]).epsilon(1e-12));
}

TEST_CASE("convolve_preparation is linear in rho0") {
    std::map<int, PhononDistribution> pure;
    for (int m = 0; m <= 3; ++m)
        pure.emplace(m, dns_ppd({m, {1.4, 0.0}}, 16));
    std::mt19937_64 gen(11);
    auto rand01 = [&] { return (gen() >> 11) * 0x1.0p-53; };
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> wa(4), wb(4);
        double sa = 0.0, sb = 0.0;
        for (int m = 0; m < 4; ++m) {
            wa[m] = rand01() + 1e-3;
            wb[m] = rand01() + 1e-3;
            sa += wa[m];
            sb += wb[m];
        }
        for (int m = 0; m < 4; ++m) {
            wa[m] /= sa;
            wb[m] /= sb;
        }
        const double lam = rand01();
        std::vector<double> wm(4);
        for (int m = 0; m < 4; ++m) wm[m] = lam * wa[m] + (1.0 - lam) * wb[m];
        const PhononDistribution pa =
            convolve_preparation(pure, {PhononDistribution::normalized(wa)});
        const PhononDistribution pb =
            convolve_preparation(pure, {PhononDistribution::normalized(wb)});
        const PhononDistribution pm =
            convolve_preparation(pure, {PhononDistribution::normalized(wm)});
        for (int k = 0; k <= 16; ++k)
            CHECK(pm.probs[k] ==
                  doctest::Approx(lam * pa.probs[k] + (1.0 - lam) * pb.probs[k]).epsilon(1e-12));
    }
}

TEST_CASE("convolve_preparation rejects mismatched and missing inputs") {
    std::map<int, PhononDistribution> pure;
    pure.emplace(0, dns_ppd({0, {1.0, 0.0}}, 10));
    pure.emplace(1, dns_ppd({1, {1.0, 0.0}}, 12)); // mismatched k_max
    DiagonalDensity rho0{PhononDistribution::normalized({0.5, 0.5})};
    CHECK_THROWS_AS(convolve_preparation(pure, rho0), std::invalid_argument);

    std::map<int, PhononDistribution> missing;
    missing.emplace(0, dns_ppd({0, {1.0, 0.0}}, 10));
    CHECK_THROWS_AS(convolve_preparation(missing, rho0), std::invalid_argument);
}

TEST_CASE("PPD zero counts match the preparation number") {
    CHECK(count_ppd_zeros(0, 0) == 0);
    CHECK(count_ppd_zeros(0, 5) == 0);
    for (int n = 1; n <= 4; ++n)
        for (int k : {n, n + 1, n + 4, n + 10})
            CHECK(count_ppd_zeros(n, k) == n);
    CHECK_THROWS_AS(count_ppd_zeros(3, 2), std::invalid_argument);
    CHECK_THROWS_AS(count_ppd_zeros(-1, 2), std::invalid_argument);
}

TEST_CASE("exact zero locations for small preparations") {
    const std::vector<double> z1 = ppd_zero_locations(1, 1);
    REQUIRE(z1.size() == 1);
    CHECK(z1[0] == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<double> z2 = ppd_zero_locations(2, 2);
    REQUIRE(z2.size() == 2);
    CHECK(z2[0] == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-12));
    CHECK(z2[1] == doctest::Approx(2.0 + std::sqrt(2.0)).epsilon(1e-12));

    // zeros are zeros of the PPD itself
    for (double x : z2)
        CHECK(dns_ppd_single(2, 2, std::sqrt(x)) < 1e-24);
}

TEST_CASE("laguerre recurrence against closed forms") {
    for (double x : {0.1, 0.7, 2.3}) {
        CHECK(laguerre(1, 0.0, x) == doctest::Approx(1.0 - x));
        CHECK(laguerre(2, 0.0, x) == doctest::Approx(1.0 - 2.0 * x + 0.5 * x * x));
        CHECK(laguerre(1, 1.0, x) == doctest::Approx(2.0 - x));
    }
}

TEST_CASE("PhononDistribution validation") {
    CHECK_THROWS_AS(PhononDistribution::normalized({0.5, 0.4}), std::invalid_argument);
    CHECK_THROWS_AS(PhononDistribution::normalized({1.2, -0.2}), std::invalid_argument);
    CHECK_NOTHROW(PhononDistribution::normalized({0.25, 0.75}));
}
