#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dnslab/config.hpp"
#include "dnslab/kick.hpp"

using namespace dnslab;

TEST_CASE("waveform CSV round-trips exactly and validates uniform spacing") {
    Waveform w;
    w.t0 = 1.5e-7;
    w.dt = 2e-9;
    for (int i = 0; i < 50; ++i)
        w.samples.push_back(std::sin(0.3 * i) * 1.234567890123456);
    const std::string csv = waveform_to_csv(w);
    const Waveform back = waveform_from_csv(csv);
    CHECK(back.samples.size() == w.samples.size());
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        CHECK(back.samples[i] == w.samples[i]);
    CHECK(waveform_to_csv(back) == csv);

    CHECK_THROWS_AS(waveform_from_csv("bad header\n1,2\n"), std::invalid_argument);
    CHECK_THROWS_AS(waveform_from_csv("t_s,volts\n0,1\n1e-9,1\n5e-9,1\n"),
                    std::invalid_argument); // non-uniform spacing
}

TEST_CASE("key-value config parsing with comments and whitespace") {
    const std::string text =
        "# trap section\n"
        "mass_amu = 39.9625909\n"
        "omega_ax_hz = 1.35e6   # axial\n"
        "eta=0.21\n"
        "filter_order = 2\n"
        "\n"
        "kick_voltage_v = 1.4\n";
    const ExperimentConfig cfg = config_from_keyvalue(text);
    CHECK(cfg.omega_ax_hz == doctest::Approx(1.35e6));
    CHECK(cfg.filter_order == 2);
    CHECK(cfg.kick_voltage_v == doctest::Approx(1.4));
    CHECK(cfg.segment_offset_m == doctest::Approx(280e-6)); // untouched default
}

TEST_CASE("config rejects unknown keys and malformed values") {
    CHECK_THROWS_AS(config_from_keyvalue("not_a_key = 1\n"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_keyvalue("eta = banana\n"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_keyvalue("eta 0.2\n"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_keyvalue("eta = 1.7\n"), std::invalid_argument); // out of range
}

TEST_CASE("JSON config carries the same schema") {
    const ExperimentConfig cfg =
        config_from_json(R"({"eta": 0.19, "shots": 400, "filter_cutoff_hz": 2.5e5})");
    CHECK(cfg.eta == doctest::Approx(0.19));
    CHECK(cfg.shots == 400);
    CHECK(cfg.filter_cutoff_hz == doctest::Approx(2.5e5));
    CHECK_THROWS_AS(config_from_json(R"({"unknown": 1})"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(R"([1,2,3])"), std::invalid_argument);
}

TEST_CASE("config text round-trips through the key-value form") {
    ExperimentConfig cfg;
    cfg.eta = 0.23;
    cfg.filter_order = 3;
    cfg.theta_points = 55;
    const ExperimentConfig back = load_config_text(config_to_keyvalue(cfg));
    CHECK(back.eta == cfg.eta);
    CHECK(back.filter_order == cfg.filter_order);
    CHECK(back.theta_points == cfg.theta_points);
    CHECK(back.span_s == cfg.span_s);
}

TEST_CASE("format dispatch distinguishes JSON from key-value text") {
    const ExperimentConfig a = load_config_text("  \n\t {\"eta\": 0.2}\n");
    CHECK(a.eta == doctest::Approx(0.2));
    const ExperimentConfig b = load_config_text("eta = 0.2\n");
    CHECK(b.eta == doctest::Approx(0.2));
}

TEST_CASE("theta grid spans the requested number of blue-sideband periods") {
    ExperimentConfig cfg;
    const std::vector<double> grid = cfg.theta_grid();
    REQUIRE(static_cast<int>(grid.size()) == cfg.theta_points);
    CHECK(grid.front() == 0.0);
    const double m_blue = matrix_element(0, +1, cfg.eta);
    CHECK(grid.back() ==
          doctest::Approx(cfg.theta_span_blue_periods * 2.0 * 3.14159265358979 / m_blue));
    for (std::size_t i = 1; i < grid.size(); ++i)
        CHECK(grid[i] > grid[i - 1]);
}
