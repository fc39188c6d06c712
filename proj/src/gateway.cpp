#include "marine/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace marine {

using nlohmann::ordered_json;

void GatewayConfig::validate() const
{
    if (gateway_id.empty() || gateway_id.find_first_of("/+#") != std::string::npos) {
        throw std::invalid_argument("gateway.gateway_id must be a non-empty single topic level");
    }
    if (topic_prefix.empty() || topic_prefix.find_first_of("+#") != std::string::npos) {
        throw std::invalid_argument("gateway.topic_prefix must be non-empty and free of wildcards");
    }
    if (qos > 1) {
        throw std::invalid_argument("gateway.qos must be 0 or 1");
    }
    if (!(radio.sensitivity_dbm < 0.0)) {
        throw std::invalid_argument("channel.sensitivity_dbm must be negative");
    }
    if (!(radio.shadowing_sigma_db >= 0.0)) {
        throw std::invalid_argument("channel.shadowing_sigma_db must be >= 0");
    }
    if (!(radio.capture_threshold_db >= 0.0)) {
        throw std::invalid_argument("channel.capture_threshold_db must be >= 0");
    }
}

std::string to_json(const TelemetryRecord& r)
{
    ordered_json j;
    j["node_id"] = r.node_id;
    j["seq"] = r.seq;
    j["ts"] = r.timestamp_s;
    j["temp_c"] = r.temp_c;
    j["lat"] = r.lat;
    j["lon"] = r.lon;
    j["battery_mv"] = r.battery_mv;
    j["rssi_dbm"] = r.rssi_dbm;
    j["gateway_id"] = r.gateway_id;
    return j.dump();
}

namespace {

template <typename T>
T get_uint(const nlohmann::json& j, const char* key)
{
    const auto& v = j.at(key);
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() > std::numeric_limits<T>::max()) {
        throw std::invalid_argument(std::string("field '") + key + "' must be an unsigned integer in range");
    }
    return v.get<T>();
}

double get_number(const nlohmann::json& j, const char* key)
{
    const auto& v = j.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
        throw std::invalid_argument(std::string("field '") + key + "' must be a finite number");
    }
    return v.get<double>();
}

} // namespace

TelemetryRecord record_from_json(std::string_view text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("telemetry payload is not JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw std::invalid_argument("telemetry payload must be a JSON object");
    }
    try {
        TelemetryRecord r;
        r.node_id = get_uint<std::uint16_t>(j, "node_id");
        r.seq = get_uint<std::uint16_t>(j, "seq");
        r.timestamp_s = get_number(j, "ts");
        r.temp_c = get_number(j, "temp_c");
        r.lat = get_number(j, "lat");
        r.lon = get_number(j, "lon");
        r.battery_mv = get_uint<std::uint16_t>(j, "battery_mv");
        r.rssi_dbm = get_number(j, "rssi_dbm");
        const auto& gw = j.at("gateway_id");
        if (!gw.is_string()) {
            throw std::invalid_argument("field 'gateway_id' must be a string");
        }
        r.gateway_id = gw.get<std::string>();
        if (r.temp_c < -55.0 || r.temp_c > 125.0 || std::abs(r.lat) > 90.0 || std::abs(r.lon) > 180.0) {
            throw std::invalid_argument("telemetry field out of range");
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("telemetry payload missing field: ") + e.what());
    }
}

std::string telemetry_topic(std::string_view prefix, std::string_view gateway_id, std::uint16_t node_id)
{
    std::string topic(prefix);
    topic += '/';
    topic += gateway_id;
    topic += '/';
    topic += std::to_string(node_id);
    topic += "/telemetry";
    return topic;
}

// ---------------------------------------------------------------- channel

double link_rssi(const ChannelContext& ctx, GeoPoint node)
{
    return rssi_at(ctx.model, haversine_m(ctx.gateway, node)) - ctx.extra_loss_db;
}

namespace {

ChannelResult measure(const Transmission& tx, const ChannelContext& ctx, Rng& rng)
{
    ChannelResult r;
    r.tx = tx;
    r.distance_m = haversine_m(ctx.gateway, tx.origin);
    const auto rx = draw_reception(rssi_at(ctx.model, r.distance_m) - ctx.extra_loss_db, ctx.radio, rng);
    r.rssi_dbm = rx.rssi_dbm;
    r.outcome = rx.received ? LinkOutcome::delivered : LinkOutcome::lost_rssi;
    return r;
}

bool overlaps(const Transmission& x, const Transmission& y)
{
    return x.start_s < y.end_s() && y.start_s < x.end_s();
}

/// Decides the collision outcome of `target` against `rivals`; every
/// transmission on the air counts as a rival, even one below sensitivity.
bool survives(const ChannelResult& target, std::span<const ChannelResult* const> rivals, double capture_db)
{
    return std::all_of(rivals.begin(), rivals.end(),
                       [&](const ChannelResult* r) { return target.rssi_dbm >= r->rssi_dbm + capture_db; });
}

void apply_collisions(std::vector<ChannelResult>& results, double capture_db)
{
    std::vector<bool> collided(results.size(), false);
    std::vector<const ChannelResult*> rivals;
    for (std::size_t i = 0; i < results.size(); ++i) {
        rivals.clear();
        for (std::size_t j = 0; j < results.size(); ++j) {
            if (i != j && overlaps(results[i].tx, results[j].tx)) {
                rivals.push_back(&results[j]);
            }
        }
        if (!rivals.empty() && !survives(results[i], rivals, capture_db)) {
            collided[i] = true;
        }
    }
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (collided[i] && results[i].outcome == LinkOutcome::delivered) {
            results[i].outcome = LinkOutcome::lost_collision;
        }
    }
}

bool tx_order(const ChannelResult& x, const ChannelResult& y)
{
    if (x.tx.start_s != y.tx.start_s) {
        return x.tx.start_s < y.tx.start_s;
    }
    if (x.tx.frame.node_id != y.tx.frame.node_id) {
        return x.tx.frame.node_id < y.tx.frame.node_id;
    }
    return x.tx.frame.seq < y.tx.frame.seq;
}

} // namespace

std::vector<ChannelResult> channel_deliver(std::span<const Transmission> transmissions, const ChannelContext& ctx,
                                           Rng& rng)
{
    std::vector<ChannelResult> results;
    results.reserve(transmissions.size());
    for (const auto& tx : transmissions) {
        results.push_back(measure(tx, ctx, rng));
    }
    apply_collisions(results, ctx.radio.capture_threshold_db);
    return results;
}

void ChannelResolver::submit(const Transmission& tx, Rng& link_rng)
{
    auto r = measure(tx, ctx_, link_rng);
    pending_.insert(std::upper_bound(pending_.begin(), pending_.end(), r, tx_order), std::move(r));
}

std::vector<ChannelResult> ChannelResolver::resolve_until(double now_s)
{
    return finalize(now_s, false);
}

std::vector<ChannelResult> ChannelResolver::flush()
{
    return finalize(0.0, true);
}

std::vector<ChannelResult> ChannelResolver::finalize(double now_s, bool everything)
{
    std::vector<ChannelResult> done;
    std::vector<const ChannelResult*> rivals;
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < pending_.size(); ++i) {
        if (everything || pending_[i].tx.end_s() <= now_s) {
            ready.push_back(i);
        }
    }
    for (auto i : ready) {
        ChannelResult r = pending_[i];
        rivals.clear();
        for (std::size_t j = 0; j < pending_.size(); ++j) {
            if (j != i && overlaps(r.tx, pending_[j].tx)) {
                rivals.push_back(&pending_[j]);
            }
        }
        for (const auto& old : recent_) {
            if (overlaps(r.tx, old.tx)) {
                rivals.push_back(&old);
            }
        }
        if (r.outcome == LinkOutcome::delivered && !rivals.empty() &&
            !survives(r, rivals, ctx_.radio.capture_threshold_db)) {
            r.outcome = LinkOutcome::lost_collision;
        }
        done.push_back(std::move(r));
    }
    // Move finalized entries to recent_, keeping pending_ sorted.
    for (auto it = ready.rbegin(); it != ready.rend(); ++it) {
        recent_.push_back(pending_[*it]);
        pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(*it));
    }
    // Anything still to come starts after min(now, earliest pending start).
    double horizon = everything ? std::numeric_limits<double>::infinity() : now_s;
    if (!pending_.empty()) {
        horizon = std::min(horizon, pending_.front().tx.start_s);
    }
    std::erase_if(recent_, [&](const ChannelResult& r) { return r.tx.end_s() <= horizon; });
    return done;
}

// ----------------------------------------------------------------- bridge

bool DedupWindow::seen(std::uint16_t node_id, std::uint16_t seq)
{
    auto& n = nodes_[node_id];
    if (n.members.contains(seq)) {
        return true;
    }
    n.order.push_back(seq);
    n.members.insert(seq);
    if (n.order.size() > window_) {
        n.members.erase(n.order.front());
        n.order.pop_front();
    }
    return false;
}

std::optional<TelemetryRecord> bridge_frame(const LoraFrame& frame, double rssi_dbm, double now_s,
                                            DedupWindow& dedup, std::string_view gateway_id)
{
    if (dedup.seen(frame.node_id, frame.seq)) {
        return std::nullopt;
    }
    TelemetryRecord r;
    r.node_id = frame.node_id;
    r.seq = frame.seq;
    r.timestamp_s = now_s;
    r.temp_c = frame.temp_centi_c / 100.0;
    r.lat = frame.lat_e7 / 1e7;
    r.lon = frame.lon_e7 / 1e7;
    r.battery_mv = frame.battery_mv;
    r.rssi_dbm = rssi_dbm;
    r.gateway_id = std::string(gateway_id);
    return r;
}

mqtt::SessionActions publish_telemetry(const TelemetryRecord& record, const GatewayConfig& config,
                                       mqtt::ClientSession& session, double now_s)
{
    const auto payload = to_json(record);
    mqtt::OutboundMessage msg{telemetry_topic(config.topic_prefix, config.gateway_id, record.node_id),
                              mqtt::to_bytes(payload), config.qos};
    return session.step(mqtt::event::PublishRequested{std::move(msg), now_s});
}

std::string GatewayStats::to_json() const
{
    ordered_json j;
    j["delivered"] = delivered;
    j["lost_rssi"] = lost_rssi;
    j["lost_collision"] = lost_collision;
    j["corrupt"] = corrupt;
    j["duplicates"] = duplicates;
    j["published"] = published;
    j["queue_drops"] = queue_drops;
    return j.dump();
}

Gateway::Gateway(GatewayConfig config)
    : config_(std::move(config)),
      session_(mqtt::SessionConfig{"gateway-" + config_.gateway_id, 30, 256, 30.0})
{
    config_.validate();
}

mqtt::SessionActions Gateway::on_channel_result(const ChannelResult& result, double now_s)
{
    switch (result.outcome) {
    case LinkOutcome::lost_rssi:
        ++counts_.lost_rssi;
        return {};
    case LinkOutcome::lost_collision:
        ++counts_.lost_collision;
        return {};
    case LinkOutcome::delivered:
        break;
    }
    LoraFrame frame;
    try {
        frame = decode_frame(result.tx.bytes);
    } catch (const FrameError&) {
        ++counts_.corrupt;
        return {};
    }
    ++counts_.delivered;
    const double ts = std::round(now_s * 1000.0) / 1000.0;
    auto record = bridge_frame(frame, result.rssi_dbm, ts, dedup_, config_.gateway_id);
    if (!record) {
        ++counts_.duplicates;
        return {};
    }
    return publish_telemetry(*record, config_, session_, now_s);
}

GatewayStats Gateway::stats() const
{
    GatewayStats s = counts_;
    s.published = session_.counters().completed();
    s.queue_drops = session_.counters().queue_drops;
    return s;
}

} // namespace marine
