#include "marine/runner.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace marine {

using nlohmann::ordered_json;

namespace {

constexpr mqtt::ConnId kGatewayConn = 1;
constexpr mqtt::ConnId kMonitorConn = 2;
constexpr std::uint64_t kJitterStream = 1;
constexpr std::uint64_t kShadowStream = 2;

/// An MQTT client hosted in-process: session, reconnect schedule, broker link.
struct HostedClient {
    mqtt::ConnId conn = 0;
    mqtt::ClientSession* session = nullptr;
    mqtt::ReconnectBackoff backoff;
    std::optional<double> reconnect_at;
    bool linked = false;
};

class Pipeline {
public:
    Pipeline(const Scenario& sc, ReadingStore& store)
        : scenario_(sc), store_(store), gateway_(sc.gateway),
          monitor_session_(mqtt::SessionConfig{"monitor", 30, 256, 30.0})
    {
        clients_[0].conn = kGatewayConn;
        clients_[0].session = &gateway_.session();
        clients_[1].conn = kMonitorConn;
        clients_[1].session = &monitor_session_;
        monitor_session_.step(mqtt::event::SubscribeRequested{{{sc.gateway.topic_prefix + "/#", 1}}, 0.0});
    }

    void start(double now)
    {
        for (auto& c : clients_) {
            connect(c, now);
        }
        pump(now);
    }

    void deliver(const ChannelResult& r)
    {
        const double at = r.tx.end_s();
        absorb(clients_[0], gateway_.on_channel_result(r, at), at);
        pump(at);
    }

    void tick(double now)
    {
        for (auto& c : clients_) {
            if (c.reconnect_at && now >= *c.reconnect_at) {
                c.reconnect_at.reset();
                connect(c, now);
            }
            absorb(c, c.session->step(mqtt::event::Tick{now}), now);
        }
        const auto expired = broker_.tick(now);
        route_broker_output(expired, now);
        pump(now);
    }

    Gateway& gateway() { return gateway_; }
    const mqtt::Broker& broker() const { return broker_; }
    const std::vector<std::string>& log_lines() const { return log_lines_; }

private:
    void connect(HostedClient& c, double now)
    {
        broker_.open(c.conn, now);
        c.linked = true;
        absorb(c, c.session->step(mqtt::event::ConnectRequested{now}), now);
    }

    void absorb(HostedClient& c, const mqtt::SessionActions& a, double now)
    {
        for (const auto& b : a.bytes_out) {
            if (c.linked) {
                to_broker_.push_back({c.conn, b});
            }
        }
        for (const auto& p : a.deliveries) {
            if (c.conn == kMonitorConn) {
                ingest(p);
            }
        }
        if (a.state_change == mqtt::SessionState::connected) {
            c.backoff.reset();
        }
        if (a.state_change == mqtt::SessionState::disconnected && a.reason != mqtt::DisconnectReason::requested) {
            if (c.linked) {
                broker_.close(c.conn);
                c.linked = false;
            }
            c.reconnect_at = now + c.backoff.next_delay();
        }
    }

    void ingest(const mqtt::Publish& p)
    {
        TelemetryRecord record;
        try {
            record = record_from_json(mqtt::to_string(p.payload));
        } catch (const std::invalid_argument&) {
            store_.ingest_json(mqtt::to_string(p.payload)); // counted as rejected
            return;
        }
        if (store_.ingest(record) == IngestResult::stored) {
            log_lines_.push_back(to_json(record));
        }
    }

    void route_broker_output(const mqtt::BrokerOutput& out, double now)
    {
        for (const auto& o : out.out) {
            to_client_.push_back({o.conn, o.bytes});
        }
        for (auto conn : out.close) {
            for (auto& c : clients_) {
                if (c.conn == conn && c.linked) {
                    c.linked = false;
                    absorb(c, c.session->step(mqtt::event::ConnectionLost{now}), now);
                }
            }
        }
    }

    void pump(double now)
    {
        while (!to_broker_.empty() || !to_client_.empty()) {
            while (!to_broker_.empty()) {
                auto [conn, bytes] = std::move(to_broker_.front());
                to_broker_.pop_front();
                route_broker_output(broker_.receive(conn, bytes, now), now);
            }
            while (!to_client_.empty()) {
                auto [conn, bytes] = std::move(to_client_.front());
                to_client_.pop_front();
                for (auto& c : clients_) {
                    if (c.conn == conn && c.linked) {
                        absorb(c, c.session->step(mqtt::event::BytesIn{std::move(bytes), now}), now);
                    }
                }
            }
        }
    }

    const Scenario& scenario_;
    ReadingStore& store_;
    mqtt::Broker broker_;
    Gateway gateway_;
    mqtt::ClientSession monitor_session_;
    HostedClient clients_[2];
    std::deque<std::pair<mqtt::ConnId, mqtt::Bytes>> to_broker_;
    std::deque<std::pair<mqtt::ConnId, mqtt::Bytes>> to_client_;
    std::vector<std::string> log_lines_;
};

} // namespace

RunReport run(const Scenario& scenario, const RunOptions& options)
{
    scenario.validate();
    RunReport report;
    report.store = options.telemetry_log ? std::make_shared<ReadingStore>(*options.telemetry_log)
                                         : std::make_shared<ReadingStore>();

    const auto env = EnvironmentField::standard();
    Pipeline pipeline(scenario, *report.store);
    ChannelResolver channel(ChannelContext{scenario.gateway.position, scenario.channel, scenario.gateway.radio,
                                           scenario.extra_loss_db()});

    struct NodeSlot {
        NodeConfig config;
        NodeState state;
        Rng jitter;
        Rng shadow;
        NodeRunStats stats;
    };
    std::vector<NodeSlot> nodes;
    for (const auto& cfg : scenario.nodes) {
        NodeRunStats st;
        st.node_id = cfg.node_id;
        st.distance_m = haversine_m(scenario.gateway.position, cfg.position);
        nodes.push_back({cfg, NodeState::fresh(cfg), Rng::stream(scenario.seed, cfg.node_id, kJitterStream),
                         Rng::stream(scenario.seed, cfg.node_id, kShadowStream), st});
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const NodeSlot& x, const NodeSlot& y) { return x.config.node_id < y.config.node_id; });

    auto account = [&](const ChannelResult& r) {
        for (auto& n : nodes) {
            if (n.config.node_id != r.tx.frame.node_id) {
                continue;
            }
            switch (r.outcome) {
            case LinkOutcome::delivered:
                ++n.stats.delivered;
                n.stats.rssi_sum_dbm += r.rssi_dbm;
                break;
            case LinkOutcome::lost_rssi: ++n.stats.lost_rssi; break;
            case LinkOutcome::lost_collision: ++n.stats.lost_collision; break;
            }
        }
        pipeline.deliver(r);
    };

    pipeline.start(0.0);
    const auto ticks = static_cast<std::int64_t>(std::ceil(scenario.duration_s / scenario.tick_s - 1e-9));
    for (std::int64_t k = 0; k < ticks; ++k) {
        const double begin = static_cast<double>(k) * scenario.tick_s;
        const double end = std::min(static_cast<double>(k + 1) * scenario.tick_s, scenario.duration_s);
        for (auto& n : nodes) {
            auto res = step(n.state, n.config, env, begin, end - begin, n.jitter);
            for (const auto& tx : res.emitted) {
                ++n.stats.emitted;
                ++report.frames_emitted;
                channel.submit(tx, n.shadow);
            }
        }
        for (const auto& r : channel.resolve_until(end)) {
            account(r);
        }
        pipeline.tick(end);
    }
    for (const auto& r : channel.flush()) {
        account(r);
    }
    pipeline.tick(scenario.duration_s);

    report.gateway = pipeline.gateway().stats();
    report.broker = pipeline.broker().stats();
    report.monitor = report.store->counters();
    for (const auto& n : nodes) {
        report.per_node.push_back(n.stats);
    }
    for (const auto& line : pipeline.log_lines()) {
        report.telemetry_jsonl += line;
        report.telemetry_jsonl += '\n';
    }
    const auto positions = reported_positions(*report.store);
    report.rssi_samples = observed_rssi_samples(positions, scenario.gateway.position, *report.store);
    try {
        report.fit = fit_log_model(report.rssi_samples, scenario.channel.distance_unit_m);
    } catch (const PathLossError& e) {
        report.fit_error = e.what();
    }
    return report;
}

std::string RunReport::stats_json() const
{
    ordered_json j;
    j["frames_emitted"] = frames_emitted;
    j["gateway"] = ordered_json::parse(gateway.to_json());
    ordered_json b;
    b["connections"] = broker.connections;
    b["publishes_in"] = broker.publishes_in;
    b["deliveries"] = broker.deliveries;
    b["protocol_errors"] = broker.protocol_errors;
    j["broker"] = b;
    ordered_json m;
    m["ingested"] = monitor.ingested;
    m["duplicates"] = monitor.duplicates;
    m["rejected"] = monitor.rejected;
    j["monitor"] = m;
    ordered_json list = ordered_json::array();
    for (const auto& n : per_node) {
        ordered_json e;
        e["node_id"] = n.node_id;
        e["distance_m"] = n.distance_m;
        e["emitted"] = n.emitted;
        e["delivered"] = n.delivered;
        e["lost_rssi"] = n.lost_rssi;
        e["lost_collision"] = n.lost_collision;
        list.push_back(std::move(e));
    }
    j["nodes"] = std::move(list);
    return j.dump(2) + "\n";
}

namespace {

std::string optional_number(const std::optional<double>& v)
{
    return v ? format_double(*v) : std::string();
}

} // namespace

std::string RunReport::delivery_curve_csv() const
{
    std::string csv = "node_id,distance_m,emitted,delivered,delivery_ratio,mean_rssi_dbm\n";
    for (const auto& n : per_node) {
        csv += std::to_string(n.node_id) + ',' + format_double(n.distance_m) + ',' + std::to_string(n.emitted) + ',' +
               std::to_string(n.delivered) + ',' + format_double(n.delivery_ratio()) + ',' +
               optional_number(n.mean_rssi_dbm()) + '\n';
    }
    return csv;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << content;
}

std::string fit_json_or_error(const std::optional<PathLossModel>& fit, const std::string& error, std::size_t samples)
{
    if (fit) {
        return fit_to_json(*fit) + "\n";
    }
    ordered_json j;
    j["error"] = error;
    j["samples"] = samples;
    return j.dump() + "\n";
}

} // namespace

void write_outputs(const RunReport& report, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    write_file(dir / "telemetry.jsonl", report.telemetry_jsonl);
    write_file(dir / "rssi_samples.csv", format_samples_csv(report.rssi_samples));
    write_file(dir / "fit.json", fit_json_or_error(report.fit, report.fit_error, report.rssi_samples.size()));
    write_file(dir / "stats.json", report.stats_json());
    write_file(dir / "delivery_curve.csv", report.delivery_curve_csv());
}

std::string SweepReport::curve_csv() const
{
    std::string csv = "distance_m,emitted,delivered,delivery_ratio,mean_rssi_dbm\n";
    for (const auto& p : points) {
        csv += format_double(p.distance_m) + ',' + std::to_string(p.emitted) + ',' + std::to_string(p.delivered) +
               ',' + format_double(p.delivery_ratio()) + ',' + optional_number(p.mean_rssi_dbm) + '\n';
    }
    return csv;
}

std::optional<double> SweepReport::reliable_boundary_m(double ratio) const
{
    std::optional<double> boundary;
    for (const auto& p : points) {
        if (p.delivery_ratio() < ratio) {
            break;
        }
        boundary = p.distance_m;
    }
    return boundary;
}

SweepReport sweep_range(const Scenario& tmpl, std::span<const double> distances_m)
{
    if (distances_m.size() < 2) {
        throw std::invalid_argument("sweep needs at least two distances");
    }
    for (double d : distances_m) {
        if (!(d > 0.0)) {
            throw std::invalid_argument("sweep distances must be positive");
        }
    }
    SweepReport report;
    const NodeConfig base = tmpl.nodes.empty() ? NodeConfig{} : tmpl.nodes.front();
    for (double d : distances_m) {
        Scenario sc = tmpl;
        NodeConfig node = base;
        node.position = quantize_e7(destination(tmpl.gateway.position, d, 90.0));
        sc.nodes = {node};
        const auto r = run(sc);
        const auto& ns = r.per_node.front();
        report.points.push_back({d, ns.emitted, ns.delivered, ns.mean_rssi_dbm()});
        report.samples.insert(report.samples.end(), r.rssi_samples.begin(), r.rssi_samples.end());
    }
    try {
        report.fit = fit_log_model(report.samples, tmpl.channel.distance_unit_m);
    } catch (const PathLossError& e) {
        report.fit_error = e.what();
    }
    return report;
}

std::vector<double> distance_grid(double lo, double hi, double step)
{
    if (!(lo > 0.0) || !(step > 0.0) || hi < lo) {
        throw std::invalid_argument("distance grid needs 0 < min <= max and step > 0");
    }
    std::vector<double> out;
    for (std::int64_t k = 0;; ++k) {
        const double d = lo + static_cast<double>(k) * step;
        if (d > hi * (1.0 + 1e-9)) {
            break;
        }
        out.push_back(d);
    }
    return out;
}

} // namespace marine
