#pragma once

// REST surface of the monitor, transport-free: a GET target string in, a
// status/content-type/body triple out. net/monitor_service binds it to HTTP.
//
//   GET /api/nodes
//   GET /api/nodes/{id}/readings?from=&to=&smoothing=none|mean|weighted&window=
//   GET /api/rssi/fit?unit_m=
//   GET /api/stats
//   GET /api/snapshot
//   GET /api/export.csv?node=

#include <map>
#include <string>
#include <string_view>

#include "marine/geo.hpp"
#include "marine/monitor/store.hpp"

namespace marine {

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

struct MonitorApiConfig {
    /// Gateway positions by gateway id, needed to turn readings into distances.
    std::map<std::string, GeoPoint> gateways;
    double default_unit_m = 60.0;
    double snapshot_period_s = 1.0;
    double snapshot_window_s = 3600.0;
};

/// Readings paired with their distance to the gateway that heard them;
/// readings from unknown gateways are skipped.
std::vector<RssiSample> observed_rssi_samples(const ReadingStore& store,
                                              const std::map<std::string, GeoPoint>& gateways);

class MonitorApi {
public:
    MonitorApi(const ReadingStore& store, MonitorApiConfig config);

    /// `target` is path plus optional query string. `now` stamps snapshots.
    HttpResponse get(std::string_view target, double now = 0.0);

    SnapshotCache& snapshots() { return snapshots_; }

private:
    HttpResponse nodes() const;
    HttpResponse readings(std::uint16_t node_id, const std::map<std::string, std::string>& query) const;
    HttpResponse fit(const std::map<std::string, std::string>& query) const;
    HttpResponse stats() const;
    HttpResponse snapshot(double now);
    HttpResponse export_csv(const std::map<std::string, std::string>& query) const;

    const ReadingStore& store_;
    MonitorApiConfig config_;
    SnapshotCache snapshots_;
};

/// "a=1&b=x%2Fy" -> {a: "1", b: "x/y"}
std::map<std::string, std::string> parse_query(std::string_view query);

} // namespace marine
