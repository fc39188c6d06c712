#pragma once

// Sensor buoy model: DS18B20 sampling, 18650 pack with solar trickle, and
// periodic frame emission.

#include <cstdint>
#include <functional>
#include <vector>

#include "marine/frame_codec.hpp"
#include "marine/geo.hpp"
#include "marine/rng.hpp"

namespace marine {

struct PowerProfile {
    double sleep_ma = 0.002;   // 2 uA
    double active_ma = 10.0;
    double active_s = 1.0;     // sampling burst per reading
    double tx_ma = 120.0;
    double nominal_v = 3.7;
};

struct NodeConfig {
    std::uint16_t node_id = 0;
    GeoPoint position;
    double sample_period_s = 60.0;
    double battery_capacity_mah = 4 * 2600.0;
    int solar_panel_count = 6;
    double panel_power_mw = 100.0;
    double airtime_s = 0.1;
    /// Transmission starts uniformly within [0, tx_jitter_s) after the sample
    /// instant, rounded to whole milliseconds.
    double tx_jitter_s = 5.0;
    /// Whether the start button has been pressed at deployment.
    bool started = true;
    PowerProfile power;
};

enum class NodeMode { sleep, active, transmitting };

struct NodeState {
    double charge_mah = 0.0;
    std::uint16_t seq = 0;
    NodeMode mode = NodeMode::sleep;
    bool started = true;

    static NodeState fresh(const NodeConfig& config)
    {
        return {config.battery_capacity_mah, 0, NodeMode::sleep, config.started};
    }
};

struct EnvironmentField {
    std::function<double(GeoPoint, double)> water_temp_c;
    std::function<double(double)> irradiance;

    /// Diurnal sine on water temperature with a north-south gradient, and a
    /// clipped-sine sun that rises at 06:00 and sets at 18:00.
    static EnvironmentField standard(double base_c = 26.0, double diurnal_amp_c = 1.5,
                                     double gradient_c_per_deg = -0.4, double ref_lat = 20.0);
};

/// One frame leaving a node's antenna.
struct Transmission {
    LoraFrame frame;
    FrameBytes bytes{};
    GeoPoint origin;
    double start_s = 0.0;
    double airtime_s = 0.0;

    double end_s() const { return start_s + airtime_s; }
};

/// Per-step energy audit, all in mAh.
struct EnergyLedger {
    double sleep_drain = 0.0;
    double sample_drain = 0.0;
    double tx_drain = 0.0;
    double solar_gain = 0.0;
    double clamp_adjust = 0.0; ///< charge removed (negative) or added (positive) by clamping to [0, capacity]
};

struct StepResult {
    std::vector<Transmission> emitted;
    EnergyLedger energy;
};

inline constexpr double kDs18b20Step = 0.0625;

/// True field temperature quantized to the 12-bit DS18B20 grid and clamped to [-55, 125].
double sample_temperature(const EnvironmentField& env, const NodeConfig& node, double time_s);
double quantize_ds18b20(double true_c);

/// mAh delivered by the panels over `dt_s` at the given irradiance fraction.
double solar_charge(const NodeConfig& config, double irradiance, double dt_s);

/// Battery terminal voltage estimate (linear 3.0 V empty .. 4.2 V full).
std::uint16_t battery_millivolts(const NodeConfig& config, const NodeState& state);

/// Advances one node over (now, now + dt]. A sample is due at every multiple
/// of sample_period_s inside that interval.
StepResult step(NodeState& state, const NodeConfig& config, const EnvironmentField& env,
                double now_s, double dt_s, Rng& rng);

} // namespace marine
