#include "marine/monitor/api.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace marine {

using nlohmann::ordered_json;

namespace {

struct BadRequest : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

HttpResponse json_response(int status, const ordered_json& body)
{
    return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, std::string_view code, std::string_view message)
{
    ordered_json j;
    j["error"] = code;
    j["message"] = message;
    return json_response(status, j);
}

ordered_json record_json(const TelemetryRecord& r)
{
    return ordered_json::parse(to_json(r));
}

double number_param(const std::map<std::string, std::string>& q, const std::string& key, double fallback)
{
    auto it = q.find(key);
    if (it == q.end() || it->second.empty()) {
        return fallback;
    }
    double v = 0.0;
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw BadRequest("parameter '" + key + "' is not a number");
    }
    return v;
}

std::uint64_t uint_param(std::string_view s, std::string_view what)
{
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw BadRequest(std::string(what) + " is not an unsigned integer");
    }
    return v;
}

int hex_value(char c)
{
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::string url_decode(std::string_view s)
{
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '+') {
            out += ' ';
        } else if (s[i] == '%' && i + 2 < s.size() && hex_value(s[i + 1]) >= 0 && hex_value(s[i + 2]) >= 0) {
            out += static_cast<char>(hex_value(s[i + 1]) * 16 + hex_value(s[i + 2]));
            i += 2;
        } else {
            out += s[i];
        }
    }
    return out;
}

} // namespace

std::map<std::string, std::string> parse_query(std::string_view query)
{
    std::map<std::string, std::string> out;
    while (!query.empty()) {
        const auto amp = query.find('&');
        const auto pair = query.substr(0, amp);
        query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
        if (pair.empty()) {
            continue;
        }
        const auto eq = pair.find('=');
        if (eq == std::string_view::npos) {
            out[url_decode(pair)] = "";
        } else {
            out[url_decode(pair.substr(0, eq))] = url_decode(pair.substr(eq + 1));
        }
    }
    return out;
}

std::vector<RssiSample> observed_rssi_samples(const ReadingStore& store,
                                              const std::map<std::string, GeoPoint>& gateways)
{
    std::vector<RssiSample> samples;
    for (const auto& r : store.all_readings()) {
        auto gw = gateways.find(r.gateway_id);
        if (gw == gateways.end()) {
            continue;
        }
        samples.push_back({haversine_m(gw->second, {r.lat, r.lon}), r.rssi_dbm});
    }
    return samples;
}

MonitorApi::MonitorApi(const ReadingStore& store, MonitorApiConfig config)
    : store_(store), config_(std::move(config)),
      snapshots_(store, config_.snapshot_period_s, config_.snapshot_window_s)
{
}

HttpResponse MonitorApi::get(std::string_view target, double now)
{
    const auto qmark = target.find('?');
    const std::string_view path = target.substr(0, qmark);
    const auto query = qmark == std::string_view::npos ? std::map<std::string, std::string>{}
                                                       : parse_query(target.substr(qmark + 1));
    try {
        if (path == "/api/nodes") {
            return nodes();
        }
        if (path == "/api/rssi/fit") {
            return fit(query);
        }
        if (path == "/api/stats") {
            return stats();
        }
        if (path == "/api/snapshot") {
            return snapshot(now);
        }
        if (path == "/api/export.csv") {
            return export_csv(query);
        }
        constexpr std::string_view kNodes = "/api/nodes/";
        constexpr std::string_view kReadings = "/readings";
        if (path.starts_with(kNodes) && path.ends_with(kReadings) &&
            path.size() > kNodes.size() + kReadings.size()) {
            const auto id_text = path.substr(kNodes.size(), path.size() - kNodes.size() - kReadings.size());
            const auto id = uint_param(id_text, "node id");
            if (id > 0xFFFF) {
                return error_response(404, "not_found", "no such node");
            }
            return readings(static_cast<std::uint16_t>(id), query);
        }
        return error_response(404, "not_found", "no route for " + std::string(path));
    } catch (const BadRequest& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const std::invalid_argument& e) {
        return error_response(400, "bad_request", e.what());
    }
}

HttpResponse MonitorApi::nodes() const
{
    ordered_json list = ordered_json::array();
    for (auto id : store_.node_ids()) {
        ordered_json n;
        n["node_id"] = id;
        n["readings"] = store_.readings(id, -std::numeric_limits<double>::infinity(),
                                        std::numeric_limits<double>::infinity()).size();
        n["latest"] = record_json(*store_.latest(id));
        list.push_back(std::move(n));
    }
    ordered_json j;
    j["count"] = list.size();
    j["nodes"] = std::move(list);
    return json_response(200, j);
}

HttpResponse MonitorApi::readings(std::uint16_t node_id, const std::map<std::string, std::string>& query) const
{
    const double from = number_param(query, "from", -std::numeric_limits<double>::max());
    const double to = number_param(query, "to", std::numeric_limits<double>::max());
    SmoothingSpec spec;
    const auto kind_it = query.find("smoothing");
    const auto kind = parse_smoothing_kind(kind_it == query.end() ? "none" : kind_it->second);
    std::size_t window = 5;
    if (auto w = query.find("window"); w != query.end()) {
        window = uint_param(w->second, "window");
    }
    switch (kind) {
    case SmoothingKind::none: spec = SmoothingSpec::none(); break;
    case SmoothingKind::mean: spec = SmoothingSpec::mean(window); break;
    case SmoothingKind::weighted: spec = SmoothingSpec::weighted(window); break;
    }
    if (kind != SmoothingKind::none) {
        spec.validate();
    }

    const auto result = query_readings(store_, node_id, from, to, spec);
    if (!result.found) {
        return error_response(404, "not_found", "unknown node " + std::to_string(node_id));
    }
    ordered_json series = ordered_json::array();
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        const auto& r = result.records[i];
        ordered_json p;
        p["ts"] = r.timestamp_s;
        p["seq"] = r.seq;
        p["temp_c"] = result.temperature[i].value;
        p["raw_temp_c"] = r.temp_c;
        p["rssi_dbm"] = r.rssi_dbm;
        p["battery_mv"] = r.battery_mv;
        series.push_back(std::move(p));
    }
    ordered_json j;
    j["node_id"] = node_id;
    j["smoothing"] = to_string(spec.kind);
    j["window"] = spec.kind == SmoothingKind::none ? 1 : spec.window;
    j["count"] = series.size();
    j["readings"] = std::move(series);
    return json_response(200, j);
}

HttpResponse MonitorApi::fit(const std::map<std::string, std::string>& query) const
{
    const double unit_m = number_param(query, "unit_m", config_.default_unit_m);
    if (!(unit_m > 0.0)) {
        throw BadRequest("unit_m must be positive");
    }
    const auto samples = observed_rssi_samples(store_, config_.gateways);
    try {
        const auto model = fit_log_model(samples, unit_m);
        ordered_json j;
        j["a"] = model.a;
        j["b"] = model.b;
        j["r_squared"] = *model.r_squared;
        j["distance_unit_m"] = model.distance_unit_m;
        j["samples"] = samples.size();
        return json_response(200, j);
    } catch (const PathLossError& e) {
        ordered_json j;
        j["error"] = "fit_failed";
        j["message"] = e.what();
        j["samples"] = samples.size();
        return json_response(422, j);
    }
}

HttpResponse MonitorApi::stats() const
{
    const auto c = store_.counters();
    ordered_json j;
    j["nodes"] = store_.node_ids().size();
    j["readings"] = store_.size();
    j["ingested"] = c.ingested;
    j["duplicates"] = c.duplicates;
    j["rejected"] = c.rejected;
    return json_response(200, j);
}

HttpResponse MonitorApi::snapshot(double now)
{
    const auto snap = snapshots_.get(now);
    ordered_json nodes = ordered_json::array();
    for (const auto& n : snap->nodes) {
        ordered_json e;
        e["node_id"] = n.latest.node_id;
        e["readings"] = n.readings;
        e["latest"] = record_json(n.latest);
        nodes.push_back(std::move(e));
    }
    ordered_json j;
    j["generated_at"] = snap->generated_at;
    j["total_readings"] = snap->total_readings;
    j["window_s"] = snap->window_s;
    j["window_readings"] = snap->window_readings;
    j["temp_min"] = snap->temp_min ? ordered_json(*snap->temp_min) : ordered_json(nullptr);
    j["temp_max"] = snap->temp_max ? ordered_json(*snap->temp_max) : ordered_json(nullptr);
    j["temp_mean"] = snap->temp_mean ? ordered_json(*snap->temp_mean) : ordered_json(nullptr);
    j["nodes"] = std::move(nodes);
    return json_response(200, j);
}

HttpResponse MonitorApi::export_csv(const std::map<std::string, std::string>& query) const
{
    std::vector<std::uint16_t> ids;
    if (auto it = query.find("node"); it != query.end() && !it->second.empty()) {
        const auto id = uint_param(it->second, "node");
        if (id > 0xFFFF || !store_.has_node(static_cast<std::uint16_t>(id))) {
            return error_response(404, "not_found", "unknown node " + it->second);
        }
        ids.push_back(static_cast<std::uint16_t>(id));
    } else {
        ids = store_.node_ids();
    }
    std::string csv = "ts,node_id,temp_c,rssi_dbm,battery_mv\n";
    for (auto id : ids) {
        for (const auto& r : store_.readings(id, -std::numeric_limits<double>::infinity(),
                                             std::numeric_limits<double>::infinity())) {
            csv += format_double(r.timestamp_s) + ',' + std::to_string(r.node_id) + ',' + format_double(r.temp_c) +
                   ',' + format_double(r.rssi_dbm) + ',' + std::to_string(r.battery_mv) + '\n';
        }
    }
    return {200, "text/csv", std::move(csv)};
}

} // namespace marine
