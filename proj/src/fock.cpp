#include "dnslab/fock.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace dnslab {

double PhononDistribution::sum() const {
    return std::accumulate(probs.begin(), probs.end(), 0.0);
}

bool PhononDistribution::is_normalized(double tol) const {
    return std::abs(sum() - 1.0) <= tol;
}

void PhononDistribution::validate(double tol) const {
    if (probs.empty())
        throw std::invalid_argument("PhononDistribution: empty probability vector");
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0 + 1e-12)
            throw std::invalid_argument("PhononDistribution: entry outside [0, 1]");
    }
    if (!truncated && !is_normalized(tol))
        throw std::invalid_argument("PhononDistribution: declared normalized but sum != 1");
}

PhononDistribution PhononDistribution::normalized(std::vector<double> probs) {
    PhononDistribution out;
    out.probs = std::move(probs);
    out.truncated = false;
    out.tail_mass = 0.0;
    out.validate();
    return out;
}

double dns_ppd_single(int n, int k, double alpha_abs) {
    if (n < 0 || k < 0)
        throw std::invalid_argument("dns_ppd: negative Fock index");
    if (!std::isfinite(alpha_abs) || alpha_abs < 0.0)
        throw std::invalid_argument("dns_ppd: alpha must be finite");
    if (alpha_abs == 0.0)
        return k == n ? 1.0 : 0.0;

    const double x = alpha_abs * alpha_abs;
    const double log_a = std::log(alpha_abs);
    const double half_norm = 0.5 * (std::lgamma(n + 1.0) + std::lgamma(k + 1.0));
    const int l_max = std::min(n, k);

    // terms of alternating sign; factor out the peak log-magnitude before
    // summing so large k stays in range
    double peak = -std::numeric_limits<double>::infinity();
    std::vector<double> logmag(l_max + 1);
    for (int l = 0; l <= l_max; ++l) {
        logmag[l] = (k + n - 2 * l) * log_a - std::lgamma(l + 1.0) -
                    std::lgamma(n - l + 1.0) - std::lgamma(k - l + 1.0) + half_norm;
        peak = std::max(peak, logmag[l]);
    }
    double s = 0.0;
    for (int l = 0; l <= l_max; ++l)
        s += (l % 2 == 0 ? 1.0 : -1.0) * std::exp(logmag[l] - peak);

    return std::exp(2.0 * peak - x) * s * s;
}

PhononDistribution dns_ppd(const DnsParams& params, int k_max) {
    if (params.n < 0)
        throw std::invalid_argument("dns_ppd: n must be nonnegative");
    if (k_max < 0)
        throw std::invalid_argument("dns_ppd: k_max must be nonnegative");
    if (!std::isfinite(params.alpha.real()) || !std::isfinite(params.alpha.imag()))
        throw std::invalid_argument("dns_ppd: alpha must be finite");

    const double a = std::abs(params.alpha);
    PhononDistribution out;
    out.probs.resize(k_max + 1);
    for (int k = 0; k <= k_max; ++k)
        out.probs[k] = dns_ppd_single(params.n, k, a);
    out.truncated = true;
    out.tail_mass = std::max(0.0, 1.0 - out.sum());
    return out;
}

Eigen::MatrixXcd displacement_operator_oracle(std::complex<double> alpha, int dim) {
    if (dim < 2)
        throw std::invalid_argument("displacement_operator_oracle: dim must be >= 2");
    if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag()))
        throw std::invalid_argument("displacement_operator_oracle: alpha must be finite");

    using cd = std::complex<double>;
    const cd i_unit(0.0, 1.0);

    // H = i (alpha a+ - conj(alpha) a) is Hermitian; D = exp(-i H)
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    for (int j = 0; j + 1 < dim; ++j) {
        const double root = std::sqrt(j + 1.0);
        h(j + 1, j) = i_unit * alpha * root;
        h(j, j + 1) = std::conj(h(j + 1, j));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    Eigen::VectorXcd phases(dim);
    for (int j = 0; j < dim; ++j)
        phases(j) = std::exp(-i_unit * es.eigenvalues()(j));
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

double oracle_column_edge_mass(const Eigen::MatrixXcd& d, int column, int guard_rows) {
    const int dim = static_cast<int>(d.rows());
    if (column < 0 || column >= dim)
        throw std::invalid_argument("oracle_column_edge_mass: column out of range");
    guard_rows = std::clamp(guard_rows, 1, dim);
    double mass = 0.0;
    for (int r = dim - guard_rows; r < dim; ++r)
        mass += std::norm(d(r, column));
    return mass;
}

std::vector<double> oracle_ppd(std::complex<double> alpha, int n, int k_max, int dim) {
    if (n < 0 || k_max < 0)
        throw std::invalid_argument("oracle_ppd: negative index");
    if (dim <= std::max(n, k_max))
        throw std::invalid_argument("oracle_ppd: dim too small for requested entries");

    const Eigen::MatrixXcd d = displacement_operator_oracle(alpha, dim);
    const int guard = std::max(4, dim / 10);
    if (oracle_column_edge_mass(d, n, guard) > 1e-12)
        std::cerr << "oracle_ppd: truncation leakage in column " << n
                  << " at dim " << dim << "; increase dim\n";

    std::vector<double> out(k_max + 1);
    for (int k = 0; k <= k_max; ++k)
        out[k] = std::norm(d(k, n));
    return out;
}

PhononDistribution convolve_preparation(const std::map<int, PhononDistribution>& pure_ppds,
                                        const DiagonalDensity& rho0) {
    rho0.diag.validate(1e-9);
    if (!rho0.diag.is_normalized(1e-9) && !rho0.diag.truncated)
        throw std::invalid_argument("convolve_preparation: rho0 not normalized");

    int k_max = -1;
    bool truncated = false;
    double tail = 0.0;
    std::vector<double> acc;
    for (int m = 0; m <= rho0.diag.k_max(); ++m) {
        const double w = rho0.diag.probs[m];
        if (w <= 0.0) continue;
        const auto it = pure_ppds.find(m);
        if (it == pure_ppds.end())
            throw std::invalid_argument("convolve_preparation: missing pure PPD for m=" +
                                        std::to_string(m));
        const PhononDistribution& p = it->second;
        if (k_max < 0) {
            k_max = p.k_max();
            acc.assign(k_max + 1, 0.0);
        } else if (p.k_max() != k_max) {
            throw std::invalid_argument("convolve_preparation: mismatched k_max across inputs");
        }
        for (int k = 0; k <= k_max; ++k)
            acc[k] += w * p.probs[k];
        truncated = truncated || p.truncated;
        tail += w * p.tail_mass;
    }
    if (k_max < 0)
        throw std::invalid_argument("convolve_preparation: rho0 carries no weight");

    PhononDistribution out;
    out.probs = std::move(acc);
    out.truncated = truncated;
    out.tail_mass = truncated ? tail : 0.0;
    return out;
}

namespace {

// inner polynomial of the PPD in x = |alpha|^2, scaled monic:
// coefficient of x^(n-l) is (-1)^l n! k! / (l! (n-l)! (k-l)!)
std::vector<double> inner_polynomial_monic(int n, int k) {
    std::vector<double> coeff(n + 1, 0.0); // coeff[j] multiplies x^j
    const double norm = std::lgamma(n + 1.0) + std::lgamma(k + 1.0);
    for (int l = 0; l <= n; ++l) {
        const double mag = norm - std::lgamma(l + 1.0) - std::lgamma(n - l + 1.0) -
                           std::lgamma(k - l + 1.0);
        coeff[n - l] = (l % 2 == 0 ? 1.0 : -1.0) * std::exp(mag);
    }
    return coeff;
}

double poly_eval(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (int j = static_cast<int>(c.size()) - 1; j >= 0; --j)
        v = v * x + c[j];
    return v;
}

double poly_deriv_eval(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (int j = static_cast<int>(c.size()) - 1; j >= 1; --j)
        v = v * x + j * c[j];
    return v;
}

} // namespace

std::vector<double> ppd_zero_locations(int n, int k) {
    if (n < 0)
        throw std::invalid_argument("ppd_zero_locations: n must be nonnegative");
    if (k < n)
        throw std::invalid_argument("ppd_zero_locations: requires k >= n");
    if (n == 0)
        return {};

    const std::vector<double> c = inner_polynomial_monic(n, k);

    // companion matrix of the monic degree-n polynomial
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j + 1 < n; ++j)
        comp(j + 1, j) = 1.0;
    for (int j = 0; j < n; ++j)
        comp(j, n - 1) = -c[j]; // leading coefficient is 1
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp);

    std::vector<double> roots;
    for (int j = 0; j < n; ++j) {
        const std::complex<double> lam = es.eigenvalues()(j);
        const double scale = std::max(1.0, std::abs(lam));
        if (std::abs(lam.imag()) > 1e-8 * scale || lam.real() <= 1e-12)
            continue;
        // Newton polish on the exact polynomial
        double x = lam.real();
        for (int it = 0; it < 50; ++it) {
            const double f = poly_eval(c, x);
            const double fp = poly_deriv_eval(c, x);
            if (fp == 0.0) break;
            const double step = f / fp;
            x -= step;
            if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) break;
        }
        if (x > 0.0)
            roots.push_back(x);
    }
    std::sort(roots.begin(), roots.end());
    // drop duplicates from eigenvalue noise (roots of Laguerre are simple)
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-9 * std::max(1.0, a); }),
                roots.end());
    return roots;
}

int count_ppd_zeros(int n, int k) {
    return static_cast<int>(ppd_zero_locations(n, k).size());
}

double laguerre(int n, double a, double x) {
    if (n < 0)
        throw std::invalid_argument("laguerre: n must be nonnegative");
    if (n == 0) return 1.0;
    double lm = 1.0;
    double l = 1.0 + a - x;
    for (int i = 1; i < n; ++i) {
        const double next = ((2.0 * i + 1.0 + a - x) * l - (i + a) * lm) / (i + 1.0);
        lm = l;
        l = next;
    }
    return l;
}

} // namespace dnslab
