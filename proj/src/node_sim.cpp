#include "marine/node_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace marine {

namespace {

constexpr double kSecondsPerDay = 86400.0;
constexpr double kTempMinC = -55.0;
constexpr double kTempMaxC = 125.0;

} // namespace

EnvironmentField EnvironmentField::standard(double base_c, double diurnal_amp_c,
                                            double gradient_c_per_deg, double ref_lat)
{
    EnvironmentField env;
    env.water_temp_c = [=](GeoPoint p, double t) {
        // warmest mid-afternoon
        const double phase = 2.0 * std::numbers::pi * (t / kSecondsPerDay - 0.375);
        return base_c + diurnal_amp_c * std::sin(phase) + gradient_c_per_deg * (p.lat - ref_lat);
    };
    env.irradiance = [](double t) {
        const double phase = 2.0 * std::numbers::pi * (t / kSecondsPerDay - 0.25);
        return std::max(0.0, std::sin(phase));
    };
    return env;
}

double quantize_ds18b20(double true_c)
{
    const double stepped = std::round(true_c / kDs18b20Step) * kDs18b20Step;
    return std::clamp(stepped, kTempMinC, kTempMaxC);
}

double sample_temperature(const EnvironmentField& env, const NodeConfig& node, double time_s)
{
    return quantize_ds18b20(env.water_temp_c(node.position, time_s));
}

double solar_charge(const NodeConfig& config, double irradiance, double dt_s)
{
    const double mw = config.solar_panel_count * config.panel_power_mw * std::clamp(irradiance, 0.0, 1.0);
    return mw * dt_s / (3600.0 * config.power.nominal_v);
}

std::uint16_t battery_millivolts(const NodeConfig& config, const NodeState& state)
{
    const double frac = std::clamp(state.charge_mah / config.battery_capacity_mah, 0.0, 1.0);
    return static_cast<std::uint16_t>(std::lround(3000.0 + 1200.0 * frac));
}

StepResult step(NodeState& state, const NodeConfig& config, const EnvironmentField& env,
                double now_s, double dt_s, Rng& rng)
{
    if (!(dt_s > 0.0)) {
        throw std::invalid_argument("step: dt must be positive");
    }
    StepResult result;
    state.mode = NodeMode::sleep;
    // A depleted buoy browns out and stays down; an unstarted one was never switched on.
    if (!state.started || state.charge_mah <= 0.0) {
        return result;
    }

    const double period = config.sample_period_s;
    const auto first_due = static_cast<std::int64_t>(std::floor(now_s / period)) + 1;
    const auto last_due = static_cast<std::int64_t>(std::floor((now_s + dt_s) / period));

    double charge = state.charge_mah;
    for (std::int64_t k = first_due; k <= last_due && charge > 0.0; ++k) {
        const double due = static_cast<double>(k) * period;
        state.mode = NodeMode::active;
        const double temp = sample_temperature(env, config, due);

        Transmission tx;
        tx.frame.node_id = config.node_id;
        tx.frame.seq = state.seq;
        tx.frame.temp_centi_c = static_cast<std::int16_t>(std::lround(temp * 100.0));
        tx.frame.lat_e7 = static_cast<std::int32_t>(std::llround(config.position.lat * 1e7));
        tx.frame.lon_e7 = static_cast<std::int32_t>(std::llround(config.position.lon * 1e7));
        tx.frame.battery_mv = battery_millivolts(config, NodeState{charge, state.seq, state.mode, true});
        tx.bytes = encode_frame(tx.frame);
        tx.origin = config.position;
        const double jitter_ms = std::floor(rng.uniform() * config.tx_jitter_s * 1000.0);
        tx.start_s = due + jitter_ms / 1000.0;
        tx.airtime_s = config.airtime_s;

        const double sample_cost = config.power.active_ma * config.power.active_s / 3600.0;
        const double tx_cost = config.power.tx_ma * config.airtime_s / 3600.0;
        state.mode = NodeMode::transmitting;
        result.energy.sample_drain += sample_cost;
        result.energy.tx_drain += tx_cost;
        charge -= sample_cost + tx_cost;
        state.seq = static_cast<std::uint16_t>(state.seq + 1);
        result.emitted.push_back(tx);
    }

    result.energy.sleep_drain = config.power.sleep_ma * dt_s / 3600.0;
    result.energy.solar_gain = solar_charge(config, env.irradiance(now_s), dt_s);
    charge += result.energy.solar_gain - result.energy.sleep_drain;

    const double clamped = std::clamp(charge, 0.0, config.battery_capacity_mah);
    result.energy.clamp_adjust = clamped - charge;
    state.charge_mah = clamped;
    state.mode = NodeMode::sleep;
    return result;
}

} // namespace marine
