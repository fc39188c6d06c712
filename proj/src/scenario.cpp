#include "marine/scenario.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace marine {

using nlohmann::json;

ScenarioError::ScenarioError(std::string field, int line, const std::string& message)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
                         (field.empty() ? std::string() : field + ": ") + message),
      field_(std::move(field)), line_(line)
{
}

std::string_view to_string(EnvironmentPreset p)
{
    return p == EnvironmentPreset::urban ? "urban" : "open";
}

namespace {

// Input iterator that reports the last character the parser looked at, so a
// SAX pass can map field paths to source lines.
struct TrackingIterator {
    using iterator_category = std::input_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char*;
    using reference = const char&;

    const char* pos = nullptr;
    const char** last_read = nullptr;

    reference operator*() const
    {
        *last_read = pos;
        return *pos;
    }
    TrackingIterator& operator++()
    {
        ++pos;
        return *this;
    }
    TrackingIterator operator++(int)
    {
        auto copy = *this;
        ++pos;
        return copy;
    }
    bool operator==(const TrackingIterator& o) const { return pos == o.pos; }
    bool operator!=(const TrackingIterator& o) const { return pos != o.pos; }
};

class LineMapper : public nlohmann::json_sax<json> {
public:
    LineMapper(const char* begin, const char** cursor) : begin_(begin), cursor_(cursor) {}

    std::map<std::string, int> lines;

    bool null() override { return value(); }
    bool boolean(bool) override { return value(); }
    bool number_integer(number_integer_t) override { return value(); }
    bool number_unsigned(number_unsigned_t) override { return value(); }
    bool number_float(number_float_t, const string_t&) override { return value(); }
    bool string(string_t&) override { return value(); }
    bool binary(binary_t&) override { return value(); }

    bool start_object(std::size_t) override { return open(false); }
    bool end_object() override { return close(); }
    bool start_array(std::size_t) override { return open(true); }
    bool end_array() override { return close(); }

    bool key(string_t& k) override
    {
        stack_.back().key = k;
        lines.emplace(path(), line());
        return true;
    }

    bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) override { return false; }

private:
    struct Level {
        bool array = false;
        std::size_t index = 0;
        std::string key;
    };

    int line() const
    {
        return 1 + static_cast<int>(std::count(begin_, *cursor_ ? *cursor_ : begin_, '\n'));
    }

    std::string path() const
    {
        std::string p;
        for (const auto& l : stack_) {
            if (l.array) {
                p += '[' + std::to_string(l.index) + ']';
            } else if (!l.key.empty()) {
                if (!p.empty()) {
                    p += '.';
                }
                p += l.key;
            }
        }
        return p;
    }

    bool open(bool array)
    {
        if (!stack_.empty() && stack_.back().array) {
            lines.emplace(path(), line());
        }
        stack_.push_back({array, 0, {}});
        return true;
    }

    bool close()
    {
        stack_.pop_back();
        return value();
    }

    bool value()
    {
        if (!stack_.empty() && stack_.back().array) {
            ++stack_.back().index;
        }
        return true;
    }

    const char* begin_;
    const char** cursor_;
    std::vector<Level> stack_;
};

class Reader {
public:
    Reader(const json& root, const std::map<std::string, int>& lines) : root_(root), lines_(lines) {}

    [[noreturn]] void fail(const std::string& field, const std::string& message) const
    {
        auto it = lines_.find(field);
        if (it == lines_.end()) {
            // fall back to the closest enclosing element
            std::string parent = field;
            while (it == lines_.end() && !parent.empty()) {
                const auto cut = parent.find_last_of(".[");
                parent = cut == std::string::npos ? std::string{} : parent.substr(0, cut);
                it = lines_.find(parent);
            }
        }
        throw ScenarioError(field, it == lines_.end() ? 0 : it->second, message);
    }

    void check_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) const
    {
        if (!obj.is_object()) {
            fail(where, "must be an object");
        }
        for (const auto& [k, _] : obj.items()) {
            if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
                fail(join(where, k), "unknown field");
            }
        }
    }

    double number(const json& obj, const std::string& where, const char* key, double fallback, bool required = false) const
    {
        if (!obj.contains(key)) {
            if (required) {
                fail(join(where, key), "required field missing");
            }
            return fallback;
        }
        const auto& v = obj[key];
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            fail(join(where, key), "must be a finite number");
        }
        return v.get<double>();
    }

    std::uint64_t unsigned_int(const json& obj, const std::string& where, const char* key, std::uint64_t max,
                               std::optional<std::uint64_t> fallback) const
    {
        if (!obj.contains(key)) {
            if (!fallback) {
                fail(join(where, key), "required field missing");
            }
            return *fallback;
        }
        const auto& v = obj[key];
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() > max) {
            fail(join(where, key), "must be an unsigned integer <= " + std::to_string(max));
        }
        return v.get<std::uint64_t>();
    }

    std::string string(const json& obj, const std::string& where, const char* key, const std::string& fallback) const
    {
        if (!obj.contains(key)) {
            return fallback;
        }
        if (!obj[key].is_string()) {
            fail(join(where, key), "must be a string");
        }
        return obj[key].get<std::string>();
    }

    static std::string join(const std::string& where, std::string_view key)
    {
        return where.empty() ? std::string(key) : where + "." + std::string(key);
    }

    const json& root() const { return root_; }

private:
    const json& root_;
    const std::map<std::string, int>& lines_;
};

} // namespace

void Scenario::validate() const
{
    if (scenario_version != 1) {
        throw ScenarioError("scenario_version", 0, "unsupported version " + std::to_string(scenario_version));
    }
    if (!(duration_s > 0.0)) {
        throw ScenarioError("duration_s", 0, "must be > 0");
    }
    if (!(tick_s > 0.0)) {
        throw ScenarioError("tick_s", 0, "must be > 0");
    }
    if (nodes.empty()) {
        throw ScenarioError("nodes", 0, "at least one node is required");
    }
    if (!(channel.distance_unit_m > 0.0)) {
        throw ScenarioError("channel.distance_unit_m", 0, "must be > 0");
    }
    if (!(urban_extra_loss_db >= 0.0)) {
        throw ScenarioError("environment.urban_extra_loss_db", 0, "must be >= 0");
    }
    try {
        gateway.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError("", 0, e.what());
    }
    std::set<std::uint16_t> ids;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        const auto field = "nodes[" + std::to_string(i) + "]";
        if (!ids.insert(n.node_id).second) {
            throw ScenarioError(field + ".node_id", 0, "duplicate node id " + std::to_string(n.node_id));
        }
        if (!(n.sample_period_s > 0.0)) {
            throw ScenarioError(field + ".sample_period_s", 0, "must be > 0");
        }
        if (!(n.battery_capacity_mah > 0.0)) {
            throw ScenarioError(field + ".battery_capacity_mah", 0, "must be > 0");
        }
        if (n.solar_panel_count < 0) {
            throw ScenarioError(field + ".solar_panel_count", 0, "must be >= 0");
        }
        if (!(n.airtime_s > 0.0)) {
            throw ScenarioError(field + ".airtime_s", 0, "must be > 0");
        }
        if (!(n.tx_jitter_s >= 0.0) || !(n.tx_jitter_s < n.sample_period_s)) {
            throw ScenarioError(field + ".tx_jitter_s", 0, "must be in [0, sample_period_s)");
        }
        if (!std::isfinite(n.position.lat) || !std::isfinite(n.position.lon) || std::abs(n.position.lat) > 90.0 ||
            std::abs(n.position.lon) > 180.0) {
            throw ScenarioError(field, 0, "position must be a finite lat/lon");
        }
        if (!std::isfinite(haversine_m(gateway.position, n.position))) {
            throw ScenarioError(field, 0, "node is not at a finite distance from the gateway");
        }
    }
}

Scenario parse_scenario(std::string_view text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
        throw ScenarioError("", line, std::string("JSON parse error: ") + e.what());
    }

    const char* cursor = nullptr;
    LineMapper mapper(text.data(), &cursor);
    json::sax_parse(TrackingIterator{text.data(), &cursor}, TrackingIterator{text.data() + text.size(), &cursor},
                    &mapper);
    Reader rd(root, mapper.lines);

    rd.check_keys(root, "", {"scenario_version", "seed", "duration_s", "tick_s", "nodes", "gateway", "channel",
                             "environment", "description"});
    Scenario sc;
    sc.scenario_version = static_cast<int>(rd.unsigned_int(root, "", "scenario_version", 1000, 1));
    if (sc.scenario_version != 1) {
        rd.fail("scenario_version", "unsupported version " + std::to_string(sc.scenario_version));
    }
    sc.seed = rd.unsigned_int(root, "", "seed", std::numeric_limits<std::uint64_t>::max(), std::nullopt);
    sc.duration_s = rd.number(root, "", "duration_s", 0.0, true);
    if (!(sc.duration_s > 0.0)) {
        rd.fail("duration_s", "must be > 0");
    }
    sc.tick_s = rd.number(root, "", "tick_s", 1.0);
    if (!(sc.tick_s > 0.0)) {
        rd.fail("tick_s", "must be > 0");
    }

    if (root.contains("channel")) {
        const auto& ch = root["channel"];
        rd.check_keys(ch, "channel", {"a", "b", "distance_unit_m", "sensitivity_dbm", "shadowing_sigma_db",
                                      "capture_threshold_db"});
        sc.channel.a = rd.number(ch, "channel", "a", sc.channel.a);
        sc.channel.b = rd.number(ch, "channel", "b", sc.channel.b);
        sc.channel.distance_unit_m = rd.number(ch, "channel", "distance_unit_m", sc.channel.distance_unit_m);
        if (!(sc.channel.distance_unit_m > 0.0)) {
            rd.fail("channel.distance_unit_m", "must be > 0");
        }
        auto& radio = sc.gateway.radio;
        radio.sensitivity_dbm = rd.number(ch, "channel", "sensitivity_dbm", radio.sensitivity_dbm);
        if (!(radio.sensitivity_dbm < 0.0)) {
            rd.fail("channel.sensitivity_dbm", "must be < 0");
        }
        radio.shadowing_sigma_db = rd.number(ch, "channel", "shadowing_sigma_db", radio.shadowing_sigma_db);
        if (!(radio.shadowing_sigma_db >= 0.0)) {
            rd.fail("channel.shadowing_sigma_db", "must be >= 0");
        }
        radio.capture_threshold_db = rd.number(ch, "channel", "capture_threshold_db", radio.capture_threshold_db);
        if (!(radio.capture_threshold_db >= 0.0)) {
            rd.fail("channel.capture_threshold_db", "must be >= 0");
        }
    }

    if (root.contains("environment")) {
        const auto& env = root["environment"];
        rd.check_keys(env, "environment", {"preset", "urban_extra_loss_db"});
        const auto preset = rd.string(env, "environment", "preset", "open");
        if (preset == "open") {
            sc.environment = EnvironmentPreset::open;
        } else if (preset == "urban") {
            sc.environment = EnvironmentPreset::urban;
        } else {
            rd.fail("environment.preset", "must be \"open\" or \"urban\"");
        }
        sc.urban_extra_loss_db = rd.number(env, "environment", "urban_extra_loss_db", sc.urban_extra_loss_db);
        if (!(sc.urban_extra_loss_db >= 0.0)) {
            rd.fail("environment.urban_extra_loss_db", "must be >= 0");
        }
    }

    if (!root.contains("gateway")) {
        rd.fail("gateway", "required field missing");
    }
    {
        const auto& gw = root["gateway"];
        rd.check_keys(gw, "gateway", {"gateway_id", "lat", "lon", "topic_prefix", "qos", "broker"});
        sc.gateway.gateway_id = rd.string(gw, "gateway", "gateway_id", sc.gateway.gateway_id);
        if (sc.gateway.gateway_id.empty() || sc.gateway.gateway_id.find_first_of("/+#") != std::string::npos) {
            rd.fail("gateway.gateway_id", "must be a non-empty single topic level");
        }
        sc.gateway.position.lat = rd.number(gw, "gateway", "lat", 0.0, true);
        sc.gateway.position.lon = rd.number(gw, "gateway", "lon", 0.0, true);
        if (std::abs(sc.gateway.position.lat) > 90.0) {
            rd.fail("gateway.lat", "must be within [-90, 90]");
        }
        if (std::abs(sc.gateway.position.lon) > 180.0) {
            rd.fail("gateway.lon", "must be within [-180, 180]");
        }
        sc.gateway.topic_prefix = rd.string(gw, "gateway", "topic_prefix", sc.gateway.topic_prefix);
        if (sc.gateway.topic_prefix.empty() || sc.gateway.topic_prefix.find_first_of("+#") != std::string::npos) {
            rd.fail("gateway.topic_prefix", "must be non-empty and free of wildcards");
        }
        sc.gateway.qos = static_cast<std::uint8_t>(rd.unsigned_int(gw, "gateway", "qos", 1, 1));
        const auto broker = rd.string(gw, "gateway", "broker", "");
        if (!broker.empty()) {
            const auto colon = broker.rfind(':');
            if (colon == std::string::npos || colon == 0) {
                rd.fail("gateway.broker", "expected HOST:PORT");
            }
            sc.gateway.broker_host = broker.substr(0, colon);
            try {
                const auto port = std::stoul(broker.substr(colon + 1));
                if (port == 0 || port > 65535) {
                    throw std::out_of_range("port");
                }
                sc.gateway.broker_port = static_cast<std::uint16_t>(port);
            } catch (const std::logic_error&) {
                rd.fail("gateway.broker", "invalid port");
            }
        }
    }

    if (!root.contains("nodes") || !root["nodes"].is_array()) {
        rd.fail("nodes", "required array missing");
    }
    const auto& nodes = root["nodes"];
    if (nodes.empty()) {
        rd.fail("nodes", "at least one node is required");
    }
    std::set<std::uint16_t> ids;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& jn = nodes[i];
        const auto where = "nodes[" + std::to_string(i) + "]";
        rd.check_keys(jn, where, {"node_id", "lat", "lon", "distance_m", "bearing_deg", "sample_period_s",
                                  "battery_capacity_mah", "solar_panel_count", "panel_power_mw", "airtime_s",
                                  "tx_jitter_s", "started"});
        NodeConfig n;
        n.node_id = static_cast<std::uint16_t>(rd.unsigned_int(jn, where, "node_id", 0xFFFF, std::nullopt));
        if (!ids.insert(n.node_id).second) {
            rd.fail(where + ".node_id", "duplicate node id " + std::to_string(n.node_id));
        }
        const bool by_latlon = jn.contains("lat") || jn.contains("lon");
        const bool by_range = jn.contains("distance_m") || jn.contains("bearing_deg");
        if (by_latlon == by_range) {
            rd.fail(where, "give either lat/lon or distance_m/bearing_deg");
        }
        if (by_latlon) {
            n.position.lat = rd.number(jn, where, "lat", 0.0, true);
            n.position.lon = rd.number(jn, where, "lon", 0.0, true);
            if (std::abs(n.position.lat) > 90.0 || std::abs(n.position.lon) > 180.0) {
                rd.fail(where + ".lat", "position out of range");
            }
        } else {
            const double d = rd.number(jn, where, "distance_m", 0.0, true);
            if (!(d > 0.0)) {
                rd.fail(where + ".distance_m", "must be > 0");
            }
            n.position = destination(sc.gateway.position, d, rd.number(jn, where, "bearing_deg", 90.0));
        }
        n.position = quantize_e7(n.position);
        n.sample_period_s = rd.number(jn, where, "sample_period_s", n.sample_period_s);
        if (!(n.sample_period_s > 0.0)) {
            rd.fail(where + ".sample_period_s", "must be > 0");
        }
        n.battery_capacity_mah = rd.number(jn, where, "battery_capacity_mah", n.battery_capacity_mah);
        if (!(n.battery_capacity_mah > 0.0)) {
            rd.fail(where + ".battery_capacity_mah", "must be > 0");
        }
        n.solar_panel_count = static_cast<int>(rd.unsigned_int(jn, where, "solar_panel_count", 1000, 6));
        n.panel_power_mw = rd.number(jn, where, "panel_power_mw", n.panel_power_mw);
        if (!(n.panel_power_mw >= 0.0)) {
            rd.fail(where + ".panel_power_mw", "must be >= 0");
        }
        n.airtime_s = rd.number(jn, where, "airtime_s", n.airtime_s);
        if (!(n.airtime_s > 0.0)) {
            rd.fail(where + ".airtime_s", "must be > 0");
        }
        n.tx_jitter_s = rd.number(jn, where, "tx_jitter_s", std::min(n.tx_jitter_s, n.sample_period_s / 2.0));
        if (!(n.tx_jitter_s >= 0.0) || !(n.tx_jitter_s < n.sample_period_s)) {
            rd.fail(where + ".tx_jitter_s", "must be in [0, sample_period_s)");
        }
        if (jn.contains("started")) {
            if (!jn["started"].is_boolean()) {
                rd.fail(where + ".started", "must be true or false");
            }
            n.started = jn["started"].get<bool>();
        }
        sc.nodes.push_back(n);
    }

    sc.validate();
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ScenarioError("", 0, "cannot open scenario file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

} // namespace marine
