#include <doctest.h>

#include <cmath>

#include "marine/node_sim.hpp"

using namespace marine;

namespace {

EnvironmentField constant_env(double temp_c, double irradiance)
{
    return {[temp_c](GeoPoint, double) { return temp_c; }, [irradiance](double) { return irradiance; }};
}

NodeConfig node()
{
    NodeConfig c;
    c.node_id = 4;
    c.position = {20.01, 110.02};
    return c;
}

} // namespace

TEST_CASE("DS18B20 quantization")
{
    CHECK(quantize_ds18b20(25.03) == 25.0);
    CHECK(quantize_ds18b20(25.0) == 25.0);
    CHECK(quantize_ds18b20(200.0) == 125.0);
    CHECK(quantize_ds18b20(-80.0) == -55.0);
    CHECK(quantize_ds18b20(25.04) == 25.0625);
    for (double t = -55.0; t <= 125.0; t += 0.37) {
        const double q = quantize_ds18b20(t);
        CHECK(std::abs(q - t) <= kDs18b20Step / 2 + 1e-12);
        CHECK(std::fmod(q / kDs18b20Step, 1.0) == 0.0);
    }
}

TEST_CASE("sample_temperature uses the environment and quantizes")
{
    const auto env = constant_env(25.03, 0.0);
    CHECK(sample_temperature(env, node(), 100.0) == 25.0);
}

TEST_CASE("solar charge arithmetic")
{
    auto c = node();
    CHECK(solar_charge(c, 0.0, 3600.0) == 0.0);
    CHECK(solar_charge(c, 1.0, 3600.0) == doctest::Approx(600.0 / 3.7).epsilon(1e-12));
    CHECK(solar_charge(c, 1.0, 3600.0) == doctest::Approx(162.16).epsilon(1e-4));
    c.solar_panel_count = 0;
    CHECK(solar_charge(c, 1.0, 3600.0) == 0.0);
    CHECK(solar_charge(c, 0.7, 3600.0) == 0.0);
}

TEST_CASE("one period emits one frame")
{
    const auto cfg = node();
    auto state = NodeState::fresh(cfg);
    Rng rng(1);
    const auto r = step(state, cfg, constant_env(25.03, 0.0), 0.0, cfg.sample_period_s, rng);
    REQUIRE(r.emitted.size() == 1);
    CHECK(state.seq == 1);
    const auto& tx = r.emitted[0];
    CHECK(tx.frame.node_id == 4);
    CHECK(tx.frame.seq == 0);
    CHECK(tx.frame.temp_centi_c == 2500);
    CHECK(tx.frame.lat_e7 == 200100000);
    CHECK(tx.frame.lon_e7 == 1100200000);
    CHECK(tx.start_s >= 60.0);
    CHECK(tx.start_s < 65.0);
    CHECK(tx.airtime_s == cfg.airtime_s);
    CHECK(decode_frame(tx.bytes) == tx.frame);
}

TEST_CASE("jitter is whole milliseconds below the configured bound")
{
    auto cfg = node();
    cfg.tx_jitter_s = 2.0;
    auto state = NodeState::fresh(cfg);
    Rng rng(8);
    const auto r = step(state, cfg, constant_env(20.0, 0.0), 0.0, 600.0, rng);
    REQUIRE(r.emitted.size() == 10);
    for (std::size_t i = 0; i < r.emitted.size(); ++i) {
        const double due = 60.0 * static_cast<double>(i + 1);
        const double jitter = r.emitted[i].start_s - due;
        CHECK(jitter >= 0.0);
        CHECK(jitter < 2.0);
        CHECK(std::abs(jitter * 1000.0 - std::round(jitter * 1000.0)) < 1e-6);
        CHECK(r.emitted[i].frame.seq == i);
    }
}

TEST_CASE("a dead battery emits nothing and keeps its state")
{
    const auto cfg = node();
    NodeState state = NodeState::fresh(cfg);
    state.charge_mah = 0.0;
    state.seq = 17;
    Rng rng(1);
    const auto r = step(state, cfg, constant_env(25.0, 1.0), 0.0, 3600.0, rng);
    CHECK(r.emitted.empty());
    CHECK(state.charge_mah == 0.0);
    CHECK(state.seq == 17);
}

TEST_CASE("an unstarted node stays silent")
{
    auto cfg = node();
    cfg.started = false;
    auto state = NodeState::fresh(cfg);
    Rng rng(1);
    CHECK(step(state, cfg, constant_env(25.0, 0.0), 0.0, 3600.0, rng).emitted.empty());
    CHECK(state.charge_mah == cfg.battery_capacity_mah);
}

TEST_CASE("sleep drain over 24 hours")
{
    auto cfg = node();
    cfg.sample_period_s = 1e9; // no samples due
    auto state = NodeState::fresh(cfg);
    Rng rng(1);
    const auto r = step(state, cfg, constant_env(25.0, 0.0), 0.0, 86400.0, rng);
    CHECK(r.emitted.empty());
    CHECK(r.energy.sleep_drain == doctest::Approx(0.048).epsilon(1e-12));
    CHECK(cfg.battery_capacity_mah - state.charge_mah == doctest::Approx(0.048).epsilon(1e-9));
}

TEST_CASE("energy ledger balances and charge stays within capacity")
{
    auto cfg = node();
    cfg.battery_capacity_mah = 50.0;
    auto state = NodeState::fresh(cfg);
    state.charge_mah = 20.0;
    const auto env = EnvironmentField::standard();
    Rng rng(4);
    for (int k = 0; k < 2000; ++k) {
        const double before = state.charge_mah;
        const auto r = step(state, cfg, env, k * 60.0, 60.0, rng);
        const auto& e = r.energy;
        const double expected = before - e.sleep_drain - e.sample_drain - e.tx_drain + e.solar_gain + e.clamp_adjust;
        REQUIRE(state.charge_mah == doctest::Approx(expected).epsilon(1e-12));
        REQUIRE(state.charge_mah >= 0.0);
        REQUIRE(state.charge_mah <= cfg.battery_capacity_mah);
    }
}

TEST_CASE("sequence numbers wrap at 16 bits")
{
    const auto cfg = node();
    auto state = NodeState::fresh(cfg);
    state.seq = 0xFFFF;
    Rng rng(1);
    const auto r = step(state, cfg, constant_env(25.0, 0.0), 0.0, 120.0, rng);
    REQUIRE(r.emitted.size() == 2);
    CHECK(r.emitted[0].frame.seq == 0xFFFF);
    CHECK(r.emitted[1].frame.seq == 0);
}

TEST_CASE("battery voltage tracks charge")
{
    const auto cfg = node();
    NodeState s = NodeState::fresh(cfg);
    CHECK(battery_millivolts(cfg, s) == 4200);
    s.charge_mah = 0.0;
    CHECK(battery_millivolts(cfg, s) == 3000);
    s.charge_mah = cfg.battery_capacity_mah / 2;
    CHECK(battery_millivolts(cfg, s) == 3600);
}

TEST_CASE("standard environment is bounded and smooth")
{
    const auto env = EnvironmentField::standard();
    for (double t = 0.0; t < 86400.0 * 2; t += 900.0) {
        const double irr = env.irradiance(t);
        CHECK(irr >= 0.0);
        CHECK(irr <= 1.0);
        const double w = env.water_temp_c({20.0, 110.0}, t);
        CHECK(w >= 24.5 - 1e-12);
        CHECK(w <= 27.5 + 1e-12);
    }
    CHECK(env.irradiance(0.0) == 0.0);
    CHECK(env.irradiance(12 * 3600.0) == doctest::Approx(1.0));
}

TEST_CASE("dt must be positive")
{
    const auto cfg = node();
    auto state = NodeState::fresh(cfg);
    Rng rng(1);
    CHECK_THROWS_AS(step(state, cfg, constant_env(25.0, 0.0), 0.0, 0.0, rng), std::invalid_argument);
}
