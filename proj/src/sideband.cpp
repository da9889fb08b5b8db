#include "dnslab/sideband.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dnslab/rng.hpp"

namespace dnslab {

void CouplingConfig::validate() const {
    if (!(eta > 0.0 && eta < 1.0))
        throw std::invalid_argument("CouplingConfig: eta must lie in (0, 1)");
    if (!(readout_fidelity > 0.5 && readout_fidelity <= 1.0))
        throw std::invalid_argument("CouplingConfig: readout_fidelity must lie in (0.5, 1]");
    if (!(bare_rabi > 0.0))
        throw std::invalid_argument("CouplingConfig: bare_rabi must be positive");
    if (contrast_decay < 0.0)
        throw std::invalid_argument("CouplingConfig: contrast_decay must be nonnegative");
}

RabiBranch& RabiDataset::branch(int delta_n) {
    if (delta_n < -1 || delta_n > 1)
        throw std::invalid_argument("RabiDataset: branch must be -1, 0 or +1");
    return branches[delta_n + 1];
}

const RabiBranch& RabiDataset::branch(int delta_n) const {
    if (delta_n < -1 || delta_n > 1)
        throw std::invalid_argument("RabiDataset: branch must be -1, 0 or +1");
    return branches[delta_n + 1];
}

void RabiDataset::validate() const {
    for (const RabiBranch& b : branches) {
        double prev = -1.0;
        for (const RabiPoint& p : b.points) {
            if (!(p.theta >= 0.0) || !std::isfinite(p.theta))
                throw std::invalid_argument("RabiDataset: theta must be nonnegative");
            if (p.theta <= prev)
                throw std::invalid_argument("RabiDataset: theta grid must be strictly increasing");
            prev = p.theta;
            if (p.shots <= 0)
                throw std::invalid_argument("RabiDataset: shots must be positive");
            if (p.up_counts < 0 || p.up_counts > p.shots)
                throw std::invalid_argument("RabiDataset: up_counts outside [0, shots]");
        }
    }
}

double matrix_element(int k, int delta_n, double eta) {
    if (k < 0)
        throw std::invalid_argument("matrix_element: k must be nonnegative");
    if (delta_n < -1 || delta_n > 1)
        throw std::invalid_argument("matrix_element: only carrier and first sidebands");
    if (k + delta_n < 0)
        return 0.0; // no phonon to remove

    const int n_lo = std::min(k, k + delta_n);
    const int n_hi = std::max(k, k + delta_n);
    const double x = eta * eta;
    return std::exp(-0.5 * x) * std::pow(eta, std::abs(delta_n)) *
           std::exp(0.5 * (std::lgamma(n_lo + 1.0) - std::lgamma(n_hi + 1.0))) *
           laguerre(n_lo, std::abs(delta_n), x);
}

double rabi_signal(const PhononDistribution& ppd, int delta_n, double theta,
                   const CouplingConfig& config) {
    config.validate();
    if (theta < 0.0 || !std::isfinite(theta))
        throw std::invalid_argument("rabi_signal: theta must be nonnegative");
    if (!ppd.is_normalized(1e-6))
        throw std::invalid_argument("rabi_signal: ppd not normalized within 1e-6");

    const double env = config.contrast_decay > 0.0 ? std::exp(-config.contrast_decay * theta) : 1.0;
    double p = 0.0;
    for (int k = 0; k <= ppd.k_max(); ++k) {
        const double m = matrix_element(k, delta_n, config.eta);
        p += ppd.probs[k] * 0.5 * (1.0 + env * std::cos(m * theta));
    }
    const double f = config.readout_fidelity;
    return f * p + (1.0 - f) * (1.0 - p);
}

RabiDataset synthesize_dataset(const PhononDistribution& ppd, const CouplingConfig& config,
                               const std::vector<double>& theta_grid, int shots,
                               std::uint64_t seed) {
    config.validate();
    if (theta_grid.empty())
        throw std::invalid_argument("synthesize_dataset: empty theta grid");
    if (shots <= 0)
        throw std::invalid_argument("synthesize_dataset: shots must be positive");

    RabiDataset data;
    data.eta = config.eta;
    data.seed = seed;
    Rng rng(seed);
    for (int delta_n : {-1, 0, +1}) {
        RabiBranch& b = data.branch(delta_n);
        b.points.reserve(theta_grid.size());
        for (double theta : theta_grid) {
            const double p = rabi_signal(ppd, delta_n, theta, config);
            b.points.push_back({theta, shots, rng.binomial(shots, p)});
        }
    }
    data.validate();
    return data;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string rabi_dataset_to_csv(const RabiDataset& data) {
    std::string out = "branch,theta_rad,shots,up_counts\n";
    for (const RabiBranch& b : data.branches) {
        for (const RabiPoint& p : b.points) {
            out += std::to_string(b.delta_n);
            out += ',';
            out += format_double(p.theta);
            out += ',';
            out += std::to_string(p.shots);
            out += ',';
            out += std::to_string(p.up_counts);
            out += '\n';
        }
    }
    return out;
}

RabiDataset rabi_dataset_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("branch,theta_rad,shots,up_counts", 0) != 0)
        throw std::invalid_argument("rabi_dataset_from_csv: missing header");

    RabiDataset data;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int branch = 0, shots = 0, up = 0;
        double theta = 0.0;
        if (std::sscanf(line.c_str(), "%d,%lf,%d,%d", &branch, &theta, &shots, &up) != 4)
            throw std::invalid_argument("rabi_dataset_from_csv: malformed row: " + line);
        data.branch(branch).points.push_back({theta, shots, up});
    }
    data.validate();
    return data;
}

std::string rabi_dataset_to_json(const RabiDataset& data) {
    nlohmann::ordered_json j;
    j["eta"] = data.eta;
    j["seed"] = data.seed;
    int shots = 0;
    for (const RabiBranch& b : data.branches)
        if (!b.points.empty()) shots = b.points.front().shots;
    j["shots"] = shots;
    j["branches"] = nlohmann::ordered_json::array();
    for (const RabiBranch& b : data.branches) {
        nlohmann::ordered_json jb;
        jb["delta_n"] = b.delta_n;
        jb["theta_rad"] = nlohmann::ordered_json::array();
        jb["shots"] = nlohmann::ordered_json::array();
        jb["up_counts"] = nlohmann::ordered_json::array();
        for (const RabiPoint& p : b.points) {
            jb["theta_rad"].push_back(p.theta);
            jb["shots"].push_back(p.shots);
            jb["up_counts"].push_back(p.up_counts);
        }
        j["branches"].push_back(std::move(jb));
    }
    return j.dump(2) + "\n";
}

RabiDataset rabi_dataset_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    RabiDataset data;
    data.eta = j.value("eta", 0.0);
    data.seed = j.value("seed", 0ULL);
    for (const auto& jb : j.at("branches")) {
        RabiBranch& b = data.branch(jb.at("delta_n").get<int>());
        const auto& thetas = jb.at("theta_rad");
        const auto& shots = jb.at("shots");
        const auto& ups = jb.at("up_counts");
        if (thetas.size() != shots.size() || thetas.size() != ups.size())
            throw std::invalid_argument("rabi_dataset_from_json: ragged branch arrays");
        for (std::size_t i = 0; i < thetas.size(); ++i)
            b.points.push_back({thetas[i].get<double>(), shots[i].get<int>(), ups[i].get<int>()});
    }
    data.validate();
    return data;
}

} // namespace dnslab
