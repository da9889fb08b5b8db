#pragma once

#include <complex>
#include <map>
#include <vector>

#include <Eigen/Dense>

namespace dnslab {

// Parameters of a displaced number state |alpha, n>: the Fock state |n>
// displaced by the complex amplitude alpha. All phonon probabilities derived
// from it depend on alpha only through |alpha|.
struct DnsParams {
    int n = 0;
    std::complex<double> alpha{0.0, 0.0};
};

// Probability vector p_k over Fock states k = 0..k_max. `truncated` marks
// vectors whose tail mass beyond k_max was cut; `tail_mass` holds the cut
// amount (1 - sum) for truncated vectors.
struct PhononDistribution {
    std::vector<double> probs;
    bool truncated = false;
    double tail_mass = 0.0;

    int k_max() const { return static_cast<int>(probs.size()) - 1; }
    double sum() const;
    bool is_normalized(double tol = 1e-9) const;

    // entries in [0, 1]; normalized vectors sum to 1 within tol
    void validate(double tol = 1e-9) const;

    static PhononDistribution normalized(std::vector<double> probs);
};

// Diagonal of a motional density matrix in the Fock basis.
struct DiagonalDensity {
    PhononDistribution diag;
};

// Phonon probability distribution of |alpha, n>:
//
//   p_k = exp(-|a|^2) n! k! [ sum_{l=0}^{min(n,k)} (-1)^l |a|^{k+n-2l}
//                             / (l! (n-l)! (k-l)!) ]^2
//
// The reciprocal factorial of a negative integer is taken as zero, which cuts
// the sum at l = min(n, k); folding |a|^{k-n} inside the square keeps every
// term finite for k < n. Factorials are evaluated through lgamma so that
// k_max of order 40 stays in range. The result is flagged truncated with the
// remaining tail mass reported.
PhononDistribution dns_ppd(const DnsParams& params, int k_max);

// single entry of the above
double dns_ppd_single(int n, int k, double alpha_abs);

// Independent oracle: the displacement operator D(alpha) = exp(alpha a+ -
// conj(alpha) a) on a Fock basis truncated at `dim`, built by spectral
// decomposition of the (Hermitian) i(alpha a+ - conj(alpha) a). The result is
// exactly unitary on the truncated space; entry (k, n) approximates
// <k|D(alpha)|n> with truncation leakage pushed to the high-k edge.
Eigen::MatrixXcd displacement_operator_oracle(std::complex<double> alpha, int dim);

// Truncation-leakage guard for oracle column n: mass carried by the top
// `guard_rows` rows. Columns under test should keep this below 1e-12; a
// warning is emitted on stderr when they do not.
double oracle_column_edge_mass(const Eigen::MatrixXcd& d, int column, int guard_rows);

// |<k|D(alpha)|n>|^2 for k = 0..k_max read from the oracle, with the edge
// guard applied (warns on stderr when leakage exceeds 1e-12).
std::vector<double> oracle_ppd(std::complex<double> alpha, int n, int k_max, int dim);

// Mixed-state PPD: weights the pure PPDs with the diagonal preparation
// density,  p~_k = sum_m rho0_mm p_k^(m).  Every m carrying weight must be
// present in pure_ppds and all inputs must share one k_max.
PhononDistribution convolve_preparation(const std::map<int, PhononDistribution>& pure_ppds,
                                        const DiagonalDensity& rho0);

// Real positive roots, in x = |alpha|^2, of the inner polynomial of the PPD
// of |alpha, n> at fixed k (equivalently of the associated Laguerre polynomial
// L_n^{(k-n)}), found from companion-matrix eigenvalues and polished by
// Newton steps. Requires k >= n; the count never exceeds n.
std::vector<double> ppd_zero_locations(int n, int k);
int count_ppd_zeros(int n, int k);

// Associated Laguerre polynomial L_n^{(a)}(x) by the three-term recurrence.
double laguerre(int n, double a, double x);

} // namespace dnslab
