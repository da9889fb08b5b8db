#include "dnslab/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dnslab/constants.hpp"

namespace dnslab {

TrapAnchors ExperimentConfig::trap_anchors() const {
    TrapAnchors a;
    a.mass_kg = mass_amu * kAtomicMassUnit;
    a.charge_c = kElementaryCharge;
    a.omega_ax = 2.0 * kPi * omega_ax_hz;
    a.segment_offset_m = segment_offset_m;
    a.field_per_volt = field_per_volt;
    a.holding_voltage_v = holding_voltage_v;
    return a;
}

KickSettings ExperimentConfig::kick_settings() const {
    KickSettings s;
    s.kick_duration_s = kick_duration_s;
    s.kick_onset_s = kick_onset_s;
    s.sample_dt_s = sample_dt_s;
    s.span_s = span_s;
    s.filter_cutoff_hz = filter_cutoff_hz;
    s.filter_order = filter_order;
    s.steps_per_period = steps_per_period;
    return s;
}

CouplingConfig ExperimentConfig::coupling() const {
    CouplingConfig c;
    c.eta = eta;
    c.readout_fidelity = readout_fidelity;
    return c;
}

std::vector<double> ExperimentConfig::theta_grid() const {
    const double m_blue = matrix_element(0, +1, eta);
    const double theta_max = theta_span_blue_periods * 2.0 * kPi / m_blue;
    std::vector<double> grid(theta_points);
    for (int i = 0; i < theta_points; ++i)
        grid[i] = theta_max * static_cast<double>(i) / static_cast<double>(theta_points - 1);
    return grid;
}

void ExperimentConfig::validate() const {
    if (!(mass_amu > 0.0) || !(omega_ax_hz > 0.0) || !(segment_offset_m > 0.0) ||
        !(field_per_volt > 0.0))
        throw std::invalid_argument("config: trap parameters must be positive");
    coupling().validate();
    kick_settings().validate();
    if (shots <= 0 || theta_points < 2 || !(theta_span_blue_periods > 0.0))
        throw std::invalid_argument("config: bad measurement grid");
    if (reconstruct_k_max < 1 || truth_k_max < reconstruct_k_max || restarts < 1)
        throw std::invalid_argument("config: bad reconstruction settings");
}

namespace {

struct Field {
    std::function<void(ExperimentConfig&, double)> set_num;
    std::function<double(const ExperimentConfig&)> get_num;
};

const std::map<std::string, Field>& schema() {
    static const std::map<std::string, Field> s = {
#define DNSLAB_NUM_FIELD(name)                                               \
    {#name, {[](ExperimentConfig& c, double v) { c.name = v; },              \
             [](const ExperimentConfig& c) { return static_cast<double>(c.name); }}}
        DNSLAB_NUM_FIELD(mass_amu),
        DNSLAB_NUM_FIELD(omega_ax_hz),
        DNSLAB_NUM_FIELD(segment_offset_m),
        DNSLAB_NUM_FIELD(field_per_volt),
        DNSLAB_NUM_FIELD(holding_voltage_v),
        DNSLAB_NUM_FIELD(eta),
        DNSLAB_NUM_FIELD(readout_fidelity),
        DNSLAB_NUM_FIELD(kick_voltage_v),
        DNSLAB_NUM_FIELD(kick_duration_s),
        DNSLAB_NUM_FIELD(kick_onset_s),
        DNSLAB_NUM_FIELD(sample_dt_s),
        DNSLAB_NUM_FIELD(span_s),
        DNSLAB_NUM_FIELD(filter_cutoff_hz),
        DNSLAB_NUM_FIELD(theta_span_blue_periods),
        {"filter_order",
         {[](ExperimentConfig& c, double v) { c.filter_order = static_cast<int>(v); },
          [](const ExperimentConfig& c) { return static_cast<double>(c.filter_order); }}},
        {"steps_per_period",
         {[](ExperimentConfig& c, double v) { c.steps_per_period = static_cast<int>(v); },
          [](const ExperimentConfig& c) { return static_cast<double>(c.steps_per_period); }}},
        {"shots",
         {[](ExperimentConfig& c, double v) { c.shots = static_cast<int>(v); },
          [](const ExperimentConfig& c) { return static_cast<double>(c.shots); }}},
        {"theta_points",
         {[](ExperimentConfig& c, double v) { c.theta_points = static_cast<int>(v); },
          [](const ExperimentConfig& c) { return static_cast<double>(c.theta_points); }}},
        {"reconstruct_k_max",
         {[](ExperimentConfig& c, double v) { c.reconstruct_k_max = static_cast<int>(v); },
          [](const ExperimentConfig& c) { return static_cast<double>(c.reconstruct_k_max); }}},
        {"truth_k_max",
         {[](ExperimentConfig& c, double v) { c.truth_k_max = static_cast<int>(v); },
          [](const ExperimentConfig& c) { return static_cast<double>(c.truth_k_max); }}},
        {"restarts",
         {[](ExperimentConfig& c, double v) { c.restarts = static_cast<int>(v); },
          [](const ExperimentConfig& c) { return static_cast<double>(c.restarts); }}},
#undef DNSLAB_NUM_FIELD
    };
    return s;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

ExperimentConfig config_from_keyvalue(const std::string& text) {
    ExperimentConfig config;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: missing '=' on line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = schema().find(key);
        if (it == schema().end())
            throw std::invalid_argument("config: unknown key '" + key + "'");
        char* end = nullptr;
        const double num = std::strtod(value.c_str(), &end);
        if (end == value.c_str() || *end != '\0')
            throw std::invalid_argument("config: bad value for '" + key + "': " + value);
        it->second.set_num(config, num);
    }
    config.validate();
    return config;
}

ExperimentConfig config_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_object())
        throw std::invalid_argument("config: JSON form must be an object");
    ExperimentConfig config;
    for (const auto& [key, value] : j.items()) {
        const auto it = schema().find(key);
        if (it == schema().end())
            throw std::invalid_argument("config: unknown key '" + key + "'");
        it->second.set_num(config, value.get<double>());
    }
    config.validate();
    return config;
}

ExperimentConfig load_config_text(const std::string& text) {
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
        return c == '{' ? config_from_json(text) : config_from_keyvalue(text);
    }
    ExperimentConfig config;
    config.validate();
    return config;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_config_text(buf.str());
}

std::string config_to_keyvalue(const ExperimentConfig& config) {
    std::string out;
    char buf[128];
    for (const auto& [key, field] : schema()) {
        std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key.c_str(), field.get_num(config));
        out += buf;
    }
    return out;
}

} // namespace dnslab
