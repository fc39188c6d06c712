#pragma once

// Terminal-monitoring storage: append-only JSON-lines log plus an in-memory
// per-node index. One writer, many readers.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "marine/gateway.hpp"
#include "marine/monitor/smoothing.hpp"

namespace marine {

enum class IngestResult { stored, duplicate, rejected };

struct IngestCounters {
    std::uint64_t ingested = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t rejected = 0;
};

struct NodeSummary {
    TelemetryRecord latest;
    std::size_t readings = 0;
};

struct Snapshot {
    double generated_at = 0.0;
    std::vector<NodeSummary> nodes; ///< ascending node id
    std::size_t total_readings = 0;
    double window_s = 3600.0;
    std::size_t window_readings = 0;
    std::optional<double> temp_min;
    std::optional<double> temp_max;
    std::optional<double> temp_mean;
};

class ReadingStore {
public:
    /// In-memory store without persistence.
    ReadingStore() = default;
    /// Replays `log_path` (if it exists) and appends new readings to it.
    /// Unparseable lines, such as a torn final write, are skipped and counted.
    explicit ReadingStore(std::filesystem::path log_path);

    ReadingStore(const ReadingStore&) = delete;
    ReadingStore& operator=(const ReadingStore&) = delete;

    /// Exact duplicates (same node, seq, gateway and timestamp) are ignored.
    IngestResult ingest(const TelemetryRecord& record);
    /// Wire entry point: malformed payloads are rejected and counted.
    IngestResult ingest_json(std::string_view payload);

    bool has_node(std::uint16_t node_id) const;
    std::vector<std::uint16_t> node_ids() const;
    /// Time-ordered readings of one node with from_s <= ts <= to_s.
    std::vector<TelemetryRecord> readings(std::uint16_t node_id, double from_s, double to_s) const;
    std::vector<TelemetryRecord> all_readings() const;
    std::optional<TelemetryRecord> latest(std::uint16_t node_id) const;

    std::size_t size() const;
    IngestCounters counters() const;
    std::size_t replay_skipped() const { return replay_skipped_; }

    /// Consistent point-in-time view; temperature stats cover readings within
    /// `window_s` of the newest timestamp.
    Snapshot snapshot(double now, double window_s = 3600.0) const;

private:
    using Key = std::tuple<std::uint16_t, std::uint16_t, std::string, double>;

    IngestResult insert_locked(const TelemetryRecord& record, bool persist);

    mutable std::shared_mutex mutex_;
    std::map<std::uint16_t, std::vector<TelemetryRecord>> by_node_;
    std::map<std::uint16_t, TelemetryRecord> latest_;
    std::set<Key> keys_;
    std::size_t size_ = 0;
    IngestCounters counters_;
    std::size_t replay_skipped_ = 0;
    std::optional<std::ofstream> log_;
};

struct QueryResult {
    bool found = false; ///< false: node unknown to the store
    std::vector<SeriesPoint> temperature;
    std::vector<TelemetryRecord> records;
};

/// Readings of `node_id` in [from_s, to_s], temperature smoothed per `spec`.
/// Throws std::invalid_argument when from_s > to_s.
QueryResult query_readings(const ReadingStore& store, std::uint16_t node_id, double from_s, double to_s,
                           const SmoothingSpec& spec);

/// Pairs each stored reading of a node in `node_positions` with its distance
/// to `gateway`.
std::vector<RssiSample> observed_rssi_samples(const std::map<std::uint16_t, GeoPoint>& node_positions,
                                              GeoPoint gateway, const ReadingStore& store);

/// Log-distance fit over every stored reading (see observed_rssi_samples).
PathLossModel fit_observed_rssi(const std::map<std::uint16_t, GeoPoint>& node_positions, GeoPoint gateway,
                                const ReadingStore& store, double unit_m = 60.0);

/// Node positions as last reported in the stored telemetry.
std::map<std::uint16_t, GeoPoint> reported_positions(const ReadingStore& store);

/// Regenerates the snapshot at most once per period; readers always get a
/// complete snapshot, never one being built.
class SnapshotCache {
public:
    explicit SnapshotCache(const ReadingStore& store, double period_s = 1.0, double window_s = 3600.0)
        : store_(store), period_s_(period_s), window_s_(window_s) {}

    std::shared_ptr<const Snapshot> get(double now);
    /// Rebuilds if at least one period has elapsed since the last build.
    bool refresh(double now);
    std::shared_ptr<const Snapshot> current() const;

private:
    const ReadingStore& store_;
    double period_s_;
    double window_s_;
    mutable std::mutex mutex_;
    std::shared_ptr<const Snapshot> snapshot_;
    std::optional<double> built_at_;
};

} // namespace marine
