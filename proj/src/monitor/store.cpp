#include "marine/monitor/store.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace marine {

namespace {

bool earlier(const TelemetryRecord& x, const TelemetryRecord& y)
{
    return std::tie(x.timestamp_s, x.seq, x.gateway_id) < std::tie(y.timestamp_s, y.seq, y.gateway_id);
}

} // namespace

ReadingStore::ReadingStore(std::filesystem::path log_path)
{
    bool torn_tail = false;
    if (std::filesystem::exists(log_path)) {
        std::ifstream in(log_path, std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            torn_tail = in.eof();
            if (line.empty()) {
                continue;
            }
            try {
                insert_locked(record_from_json(line), false);
            } catch (const std::invalid_argument&) {
                ++replay_skipped_;
            }
        }
    }
    log_.emplace(log_path, std::ios::app | std::ios::binary);
    if (!*log_) {
        throw std::runtime_error("cannot open reading log " + log_path.string());
    }
    if (torn_tail) {
        // Close off a partial last line so the next record starts cleanly.
        *log_ << '\n';
        log_->flush();
    }
}

IngestResult ReadingStore::ingest(const TelemetryRecord& record)
{
    std::unique_lock lock(mutex_);
    return insert_locked(record, true);
}

IngestResult ReadingStore::ingest_json(std::string_view payload)
{
    TelemetryRecord record;
    try {
        record = record_from_json(payload);
    } catch (const std::invalid_argument&) {
        std::unique_lock lock(mutex_);
        ++counters_.rejected;
        return IngestResult::rejected;
    }
    return ingest(record);
}

IngestResult ReadingStore::insert_locked(const TelemetryRecord& record, bool persist)
{
    Key key{record.node_id, record.seq, record.gateway_id, record.timestamp_s};
    if (!keys_.insert(key).second) {
        ++counters_.duplicates;
        return IngestResult::duplicate;
    }
    auto& series = by_node_[record.node_id];
    series.insert(std::upper_bound(series.begin(), series.end(), record, earlier), record);
    auto it = latest_.find(record.node_id);
    if (it == latest_.end() || earlier(it->second, record)) {
        latest_[record.node_id] = record;
    }
    ++size_;
    ++counters_.ingested;
    if (persist && log_) {
        *log_ << to_json(record) << '\n';
        log_->flush();
    }
    return IngestResult::stored;
}

bool ReadingStore::has_node(std::uint16_t node_id) const
{
    std::shared_lock lock(mutex_);
    return by_node_.contains(node_id);
}

std::vector<std::uint16_t> ReadingStore::node_ids() const
{
    std::shared_lock lock(mutex_);
    std::vector<std::uint16_t> ids;
    for (const auto& [id, _] : by_node_) {
        ids.push_back(id);
    }
    return ids;
}

std::vector<TelemetryRecord> ReadingStore::readings(std::uint16_t node_id, double from_s, double to_s) const
{
    std::shared_lock lock(mutex_);
    std::vector<TelemetryRecord> out;
    auto it = by_node_.find(node_id);
    if (it == by_node_.end()) {
        return out;
    }
    for (const auto& r : it->second) {
        if (r.timestamp_s >= from_s && r.timestamp_s <= to_s) {
            out.push_back(r);
        }
    }
    return out;
}

std::vector<TelemetryRecord> ReadingStore::all_readings() const
{
    std::shared_lock lock(mutex_);
    std::vector<TelemetryRecord> out;
    out.reserve(size_);
    for (const auto& [_, series] : by_node_) {
        out.insert(out.end(), series.begin(), series.end());
    }
    return out;
}

std::optional<TelemetryRecord> ReadingStore::latest(std::uint16_t node_id) const
{
    std::shared_lock lock(mutex_);
    auto it = latest_.find(node_id);
    if (it == latest_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t ReadingStore::size() const
{
    std::shared_lock lock(mutex_);
    return size_;
}

IngestCounters ReadingStore::counters() const
{
    std::shared_lock lock(mutex_);
    return counters_;
}

Snapshot ReadingStore::snapshot(double now, double window_s) const
{
    std::shared_lock lock(mutex_);
    Snapshot snap;
    snap.generated_at = now;
    snap.window_s = window_s;
    snap.total_readings = size_;
    double newest = -std::numeric_limits<double>::infinity();
    for (const auto& [id, rec] : latest_) {
        snap.nodes.push_back({rec, by_node_.at(id).size()});
        newest = std::max(newest, rec.timestamp_s);
    }
    double sum = 0.0;
    for (const auto& [_, series] : by_node_) {
        for (const auto& r : series) {
            if (r.timestamp_s < newest - window_s) {
                continue;
            }
            ++snap.window_readings;
            sum += r.temp_c;
            snap.temp_min = std::min(snap.temp_min.value_or(r.temp_c), r.temp_c);
            snap.temp_max = std::max(snap.temp_max.value_or(r.temp_c), r.temp_c);
        }
    }
    if (snap.window_readings > 0) {
        snap.temp_mean = sum / static_cast<double>(snap.window_readings);
    }
    return snap;
}

QueryResult query_readings(const ReadingStore& store, std::uint16_t node_id, double from_s, double to_s,
                           const SmoothingSpec& spec)
{
    if (from_s > to_s) {
        throw std::invalid_argument("query window has from > to");
    }
    spec.validate();
    QueryResult result;
    result.found = store.has_node(node_id);
    result.records = store.readings(node_id, from_s, to_s);
    std::vector<SeriesPoint> raw;
    raw.reserve(result.records.size());
    for (const auto& r : result.records) {
        raw.push_back({r.timestamp_s, r.temp_c});
    }
    result.temperature = smooth(raw, spec);
    return result;
}

std::vector<RssiSample> observed_rssi_samples(const std::map<std::uint16_t, GeoPoint>& node_positions,
                                              GeoPoint gateway, const ReadingStore& store)
{
    std::vector<RssiSample> samples;
    for (const auto& [id, pos] : node_positions) {
        const double d = haversine_m(gateway, pos);
        for (const auto& r : store.readings(id, -std::numeric_limits<double>::infinity(),
                                            std::numeric_limits<double>::infinity())) {
            samples.push_back({d, r.rssi_dbm});
        }
    }
    return samples;
}

PathLossModel fit_observed_rssi(const std::map<std::uint16_t, GeoPoint>& node_positions, GeoPoint gateway,
                                const ReadingStore& store, double unit_m)
{
    const auto samples = observed_rssi_samples(node_positions, gateway, store);
    return fit_log_model(samples, unit_m);
}

std::map<std::uint16_t, GeoPoint> reported_positions(const ReadingStore& store)
{
    std::map<std::uint16_t, GeoPoint> out;
    for (auto id : store.node_ids()) {
        if (auto rec = store.latest(id)) {
            out[id] = {rec->lat, rec->lon};
        }
    }
    return out;
}

std::shared_ptr<const Snapshot> SnapshotCache::get(double now)
{
    refresh(now);
    return current();
}

bool SnapshotCache::refresh(double now)
{
    {
        std::lock_guard lock(mutex_);
        if (built_at_ && now - *built_at_ < period_s_) {
            return false;
        }
    }
    auto fresh = std::make_shared<const Snapshot>(store_.snapshot(now, window_s_));
    std::lock_guard lock(mutex_);
    snapshot_ = std::move(fresh);
    built_at_ = now;
    return true;
}

std::shared_ptr<const Snapshot> SnapshotCache::current() const
{
    std::lock_guard lock(mutex_);
    return snapshot_;
}

} // namespace marine
