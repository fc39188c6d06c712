#pragma once

// LoRa -> MQTT bridge: radio channel with ALOHA collisions and capture,
// duplicate suppression, canonical JSON telemetry, MQTT publishing.

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "marine/geo.hpp"
#include "marine/mqtt/session.hpp"
#include "marine/node_sim.hpp"
#include "marine/pathloss.hpp"

namespace marine {

struct GatewayConfig {
    std::string gateway_id = "gw1";
    GeoPoint position;
    RadioParams radio;
    std::string broker_host = "127.0.0.1";
    std::uint16_t broker_port = 1883;
    std::string topic_prefix = "marine/v1";
    std::uint8_t qos = 1;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct TelemetryRecord {
    std::uint16_t node_id = 0;
    std::uint16_t seq = 0;
    double timestamp_s = 0.0;
    double temp_c = 0.0;
    double lat = 0.0;
    double lon = 0.0;
    std::uint16_t battery_mv = 0;
    double rssi_dbm = 0.0;
    std::string gateway_id;

    friend bool operator==(const TelemetryRecord&, const TelemetryRecord&) = default;
};

/// Canonical payload: fixed key order node_id, seq, ts, temp_c, lat, lon,
/// battery_mv, rssi_dbm, gateway_id; no whitespace; shortest round-trip numbers.
std::string to_json(const TelemetryRecord& record);

/// Parses a canonical (or any key-order) telemetry object. Throws
/// std::invalid_argument on malformed input.
TelemetryRecord record_from_json(std::string_view text);

std::string telemetry_topic(std::string_view prefix, std::string_view gateway_id, std::uint16_t node_id);

// ---------------------------------------------------------------- channel

struct ChannelContext {
    GeoPoint gateway;
    PathLossModel model;
    RadioParams radio;
    double extra_loss_db = 0.0; ///< environment preset loss subtracted from every link
};

enum class LinkOutcome { delivered, lost_rssi, lost_collision };

struct ChannelResult {
    Transmission tx;
    LinkOutcome outcome = LinkOutcome::lost_rssi;
    double distance_m = 0.0;
    double rssi_dbm = 0.0; ///< as measured at the gateway, shadowing included
};

/// Mean rssi of a link after environment loss, no shadowing.
double link_rssi(const ChannelContext& ctx, GeoPoint node);

/// Resolves a batch of transmissions sorted by start time. Every transmission
/// draws its shadowing from `rng` in input order. Overlapping transmissions
/// collide: all are lost unless one beats every overlapping rival by at least
/// the capture threshold. Results are in input order.
std::vector<ChannelResult> channel_deliver(std::span<const Transmission> transmissions, const ChannelContext& ctx,
                                           Rng& rng);

/// Incremental form of channel_deliver for a running clock. Shadowing is drawn
/// at submit time from the caller's per-link stream; a transmission is
/// finalized once the clock has passed its end, when every possible rival is
/// already known.
class ChannelResolver {
public:
    explicit ChannelResolver(ChannelContext ctx) : ctx_(std::move(ctx)) {}

    /// `tx.start_s` must be later than the clock of the last resolve_until call.
    void submit(const Transmission& tx, Rng& link_rng);
    std::vector<ChannelResult> resolve_until(double now_s);
    std::vector<ChannelResult> flush();

    const ChannelContext& context() const { return ctx_; }
    std::size_t pending() const { return pending_.size(); }

private:
    std::vector<ChannelResult> finalize(double now_s, bool everything);

    ChannelContext ctx_;
    std::vector<ChannelResult> pending_; // sorted by (start, node_id, seq)
    std::vector<ChannelResult> recent_;  // finalized but still able to overlap pending ones
};

// ----------------------------------------------------------------- bridge

/// Remembers the last `window` sequence numbers per node.
class DedupWindow {
public:
    explicit DedupWindow(std::size_t window = 1024) : window_(window) {}

    /// True if (node, seq) was already seen; otherwise records it.
    bool seen(std::uint16_t node_id, std::uint16_t seq);

private:
    struct PerNode {
        std::deque<std::uint16_t> order;
        std::unordered_set<std::uint16_t> members;
    };
    std::size_t window_;
    std::unordered_map<std::uint16_t, PerNode> nodes_;
};

/// nullopt for a duplicate (node_id, seq).
std::optional<TelemetryRecord> bridge_frame(const LoraFrame& frame, double rssi_dbm, double now_s,
                                            DedupWindow& dedup, std::string_view gateway_id);

/// Hands one record to the MQTT session; queued while the session is down.
mqtt::SessionActions publish_telemetry(const TelemetryRecord& record, const GatewayConfig& config,
                                       mqtt::ClientSession& session, double now_s);

struct GatewayStats {
    std::uint64_t delivered = 0;
    std::uint64_t lost_rssi = 0;
    std::uint64_t lost_collision = 0;
    std::uint64_t corrupt = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t published = 0;
    std::uint64_t queue_drops = 0;

    std::string to_json() const;
};

/// Gateway event loop state: dedup, counters and the uplink MQTT session.
class Gateway {
public:
    explicit Gateway(GatewayConfig config);

    const GatewayConfig& config() const { return config_; }
    mqtt::ClientSession& session() { return session_; }
    const mqtt::ClientSession& session() const { return session_; }

    /// Counts the outcome; a delivered frame is decoded, bridged and published.
    mqtt::SessionActions on_channel_result(const ChannelResult& result, double now_s);
    mqtt::SessionActions on_session_event(const mqtt::SessionEvent& ev) { return session_.step(ev); }

    GatewayStats stats() const;

private:
    GatewayConfig config_;
    mqtt::ClientSession session_;
    DedupWindow dedup_;
    GatewayStats counts_;
};

} // namespace marine
