#pragma once

// End-to-end discrete-event pipeline: nodes -> channel -> gateway -> broker
// -> monitor, driven by one logical clock in fixed tick steps.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marine/gateway.hpp"
#include "marine/monitor/store.hpp"
#include "marine/mqtt/broker.hpp"
#include "marine/scenario.hpp"

namespace marine {

struct NodeRunStats {
    std::uint16_t node_id = 0;
    double distance_m = 0.0;
    std::uint64_t emitted = 0;
    std::uint64_t delivered = 0;
    std::uint64_t lost_rssi = 0;
    std::uint64_t lost_collision = 0;
    double rssi_sum_dbm = 0.0; ///< over delivered frames

    double delivery_ratio() const { return emitted == 0 ? 0.0 : static_cast<double>(delivered) / emitted; }
    std::optional<double> mean_rssi_dbm() const
    {
        return delivered == 0 ? std::nullopt : std::optional<double>(rssi_sum_dbm / static_cast<double>(delivered));
    }
};

struct RunReport {
    std::string telemetry_jsonl;          ///< monitor log, one canonical record per line
    std::uint64_t frames_emitted = 0;
    GatewayStats gateway;
    mqtt::BrokerStats broker;
    IngestCounters monitor;
    std::vector<NodeRunStats> per_node;   ///< ascending node id
    std::vector<RssiSample> rssi_samples; ///< every stored reading vs its gateway distance
    std::optional<PathLossModel> fit;
    std::string fit_error;
    std::shared_ptr<ReadingStore> store;

    std::string stats_json() const;
    std::string delivery_curve_csv() const;
};

struct RunOptions {
    /// Persist the monitor's log here (appended as the run proceeds).
    std::optional<std::filesystem::path> telemetry_log;
};

RunReport run(const Scenario& scenario, const RunOptions& options = {});

/// telemetry.jsonl, rssi_samples.csv, fit.json, stats.json, delivery_curve.csv
void write_outputs(const RunReport& report, const std::filesystem::path& dir);

struct SweepPoint {
    double distance_m = 0.0;
    std::uint64_t emitted = 0;
    std::uint64_t delivered = 0;
    std::optional<double> mean_rssi_dbm;

    double delivery_ratio() const { return emitted == 0 ? 0.0 : static_cast<double>(delivered) / emitted; }
};

struct SweepReport {
    std::vector<SweepPoint> points;
    std::vector<RssiSample> samples;
    std::optional<PathLossModel> fit;
    std::string fit_error;

    std::string curve_csv() const;
    /// Largest grid distance up to which every point delivers at least `ratio`.
    std::optional<double> reliable_boundary_m(double ratio = 0.95) const;
};

/// One single-node run per distance, the template's first node placed due
/// east of the gateway. Every run keeps that node's id, so all distances see
/// the same shadowing draws and delivery is monotone in distance.
SweepReport sweep_range(const Scenario& scenario_template, std::span<const double> distances_m);

/// distances lo, lo+step, ... up to hi inclusive (with a 1e-9 relative slack).
std::vector<double> distance_grid(double lo, double hi, double step);

} // namespace marine
