// Acceptance checks, one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "generators.hpp"
#include "marine/frame_codec.hpp"
#include "marine/geo.hpp"
#include "marine/monitor/api.hpp"
#include "marine/monitor/smoothing.hpp"
#include "marine/monitor/store.hpp"
#include "marine/mqtt/codec.hpp"
#include "marine/pathloss.hpp"
#include "marine/rng.hpp"
#include "marine/runner.hpp"
#include "marine/scenario.hpp"
#include "test_support.hpp"

using namespace marine;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

/// Collects failed sub-checks of one criterion.
class Criterion {
public:
    void check(bool ok, const std::string& what)
    {
        if (!ok) {
            failures_.push_back(what);
        }
    }
    void note(const std::string& s) { notes_.push_back(s); }
    bool passed() const { return failures_.empty(); }
    const std::vector<std::string>& failures() const { return failures_; }
    const std::vector<std::string>& notes() const { return notes_; }

private:
    std::vector<std::string> failures_;
    std::vector<std::string> notes_;
};

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string repo_path(const std::string& rel) { return test::data_path("../../" + rel); }

std::vector<double> unit_grid(std::size_t count)
{
    std::vector<double> d;
    for (std::size_t k = 1; k <= count; ++k) {
        d.push_back(60.0 * static_cast<double>(k));
    }
    return d;
}

void noiseless_fit(Criterion& c)
{
    const auto oracle = nlohmann::json::parse(test::read_text(test::data_path("golden/fit_oracle.json")));
    const auto t0 = Clock::now();
    const auto model = PathLossModel::reference();
    std::vector<RssiSample> samples;
    for (double d : unit_grid(40)) {
        samples.push_back({d, rssi_at(model, d)});
    }
    const auto fit = fit_log_model(samples, 60.0);
    const double elapsed = seconds_since(t0);
    c.check(std::abs(fit.a - (-22.06)) < 1e-9, "a within 1e-9");
    c.check(std::abs(fit.b - (-50.194)) < 1e-9, "b within 1e-9");
    c.check(fit.r_squared && *fit.r_squared == 1.0, "R^2 exactly 1.0");
    c.check(std::abs(fit.a - oracle["noiseless_40"]["a"].get<double>()) < 1e-12, "a agrees with numpy oracle");
    c.check(std::abs(fit.b - oracle["noiseless_40"]["b"].get<double>()) < 1e-12, "b agrees with numpy oracle");
    c.check(elapsed < 1.0, "runtime < 1 s");
    c.note("a=" + format_double(fit.a) + " b=" + format_double(fit.b) + " r2=" + format_double(*fit.r_squared));
}

void noisy_fit(Criterion& c)
{
    Rng rng(42);
    const auto distances = unit_grid(40);
    const auto samples = synthesize_samples(PathLossModel::reference(), distances, 3.0, rng);
    const auto fit = fit_log_model(samples, 60.0);
    const double r2 = fit.r_squared.value_or(-1.0);
    c.check(r2 >= 0.90 && r2 < 1.0, "R^2 in [0.90, 1.0)");
    c.check(format_samples_csv(samples) == test::read_text(test::data_path("golden/rssi_sigma3_seed42.csv")),
            "samples match frozen csv");
    c.check(fit_to_json(fit) + "\n" == test::read_text(test::data_path("golden/fit_sigma3_seed42.json")),
            "fit matches frozen golden bit-exactly");
    const auto oracle = nlohmann::json::parse(test::read_text(test::data_path("golden/fit_oracle.json")));
    const auto& o = oracle["sigma3_seed42_40"];
    c.check(std::abs(fit.a - o["a"].get<double>()) < 1e-9, "a agrees with numpy oracle");
    c.check(std::abs(fit.b - o["b"].get<double>()) < 1e-9, "b agrees with numpy oracle");
    c.check(std::abs(r2 - o["r_squared"].get<double>()) < 1e-12, "R^2 agrees with numpy oracle");
    c.note("r2=" + format_double(r2));
}

void range_consistency(Criterion& c)
{
    const double range = max_range(PathLossModel::reference(), -132.0);
    const double closed_form = 60.0 * std::exp(81.806 / 22.06);
    c.check(std::abs(range - 2447.0) <= 1.0, "max_range within 1 m of 2447");
    c.check(std::abs(range - closed_form) < 1e-6, "max_range matches closed form");

    auto tmpl = load_scenario(repo_path("scenarios/sweep_open.json"));
    tmpl.gateway.radio.shadowing_sigma_db = 0.0;
    const auto grid = distance_grid(60.0, 4020.0, 60.0);
    const auto rep = sweep_range(tmpl, grid);
    const auto cliff = rep.reliable_boundary_m(1.0);
    c.check(cliff.has_value(), "sweep has a fully delivering prefix");
    if (cliff) {
        c.check(std::abs(*cliff - range) <= 60.0, "sweep cliff within one 60 m step of max_range");
        c.check(*cliff >= 2000.0 && *cliff <= 4000.0, "cliff inside the 2-4 km band");
        bool sharp = true;
        for (const auto& p : rep.points) {
            const double expect = p.distance_m <= *cliff ? 1.0 : 0.0;
            sharp = sharp && p.delivery_ratio() == expect;
        }
        c.check(sharp, "noiseless sweep is a step function");
        c.note("max_range=" + format_double(range) + " cliff=" + format_double(*cliff));
    }
}

void urban_boundary(Criterion& c)
{
    const auto tmpl = load_scenario(repo_path("scenarios/sweep_urban.json"));
    c.check(tmpl.environment == EnvironmentPreset::urban, "urban preset selected");
    c.check(tmpl.extra_loss_db() == 12.0, "12 dB urban loss");
    const auto rep = sweep_range(tmpl, distance_grid(60.0, 3000.0, 60.0));
    const auto boundary = rep.reliable_boundary_m(0.95);
    c.check(boundary.has_value(), "a 95% boundary exists");
    if (boundary) {
        c.check(*boundary >= 1000.0 && *boundary <= 2000.0, "boundary in [1000, 2000] m");
        c.note("boundary=" + format_double(*boundary) +
               " sigma=" + format_double(tmpl.gateway.radio.shadowing_sigma_db));
    }
}

void protocol_codecs(Criterion& c)
{
    using namespace marine::mqtt;
    const auto t0 = Clock::now();
    const auto packets = test::data_path("golden/mqtt_packets.hex");

    c.check(encode_packet(PingReq{}) == Bytes{0xC0, 0x00}, "PingReq encodes to c0 00");
    c.check(test::read_labelled_hex(packets, "pingreq") == Bytes{0xC0, 0x00}, "PingReq golden file");

    std::istringstream rl(test::read_text(test::data_path("golden/mqtt_remaining_length.hex")));
    std::string line;
    int boundaries = 0;
    while (std::getline(rl, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos || line[0] == '#') {
            continue;
        }
        const auto n = static_cast<std::uint32_t>(std::stoul(line.substr(0, colon)));
        const auto bytes = test::parse_hex(line.substr(colon + 1));
        const auto dec = decode_remaining_length(bytes);
        c.check(encode_remaining_length(n) == bytes && dec.value == n && dec.size == bytes.size(),
                "remaining length " + std::to_string(n));
        ++boundaries;
    }
    c.check(boundaries == 10, "ten remaining-length boundaries");

    // Publish to "a/b" with payload "hi", QoS 0. The body is 7 bytes, so the
    // length byte is 0x07.
    Publish pub;
    pub.topic = "a/b";
    pub.payload = to_bytes("hi");
    const Bytes pub_bytes = {0x30, 0x07, 0x00, 0x03, 0x61, 0x2F, 0x62, 0x68, 0x69};
    c.check(encode_packet(pub) == pub_bytes, "Publish example encodes");
    const auto pub_dec = decode_packet(pub_bytes);
    c.check(!pub_dec.need_more() && std::get<Publish>(*pub_dec.packet) == pub, "Publish example decodes");

    for (const char* label : {"pingresp", "disconnect", "publish_qos0_a_b_hi", "publish_qos1_id7",
                              "publish_qos1_dup_retain", "puback_300", "connack_accepted", "connack_refused_5",
                              "connect_gateway_gw1", "subscribe_id1", "suback_id1"}) {
        const auto bytes = test::read_labelled_hex(packets, label);
        const auto r = decode_packet(bytes);
        c.check(!bytes.empty() && !r.need_more() && r.consumed == bytes.size() && encode_packet(*r.packet) == bytes,
                std::string("golden vector ") + label);
    }

    const std::string check_input = "123456789";
    const std::vector<std::uint8_t> check_bytes(check_input.begin(), check_input.end());
    c.check(crc16_ccitt_false(check_bytes) == 0x29B1, "CRC check value 0x29B1");
    LoraFrame example;
    example.node_id = 7;
    example.seq = 42;
    example.temp_centi_c = 2503;
    example.lat_e7 = 200000000;
    example.lon_e7 = 1101234560;
    example.battery_mv = 3700;
    const auto frame_golden = test::read_hex_file(test::data_path("golden/frame_node7_seq42.hex"));
    const auto frame_bytes = encode_frame(example);
    c.check(std::vector<std::uint8_t>(frame_bytes.begin(), frame_bytes.end()) == frame_golden, "frame golden vector");

    constexpr int kTrials = 10000;
    Rng mqtt_rng(5);
    int mqtt_ok = 0;
    for (int i = 0; i < kTrials; ++i) {
        const auto p = test::random_packet(mqtt_rng);
        const auto bytes = encode_packet(p);
        const auto r = decode_packet(bytes);
        mqtt_ok += !r.need_more() && r.consumed == bytes.size() && *r.packet == p;
    }
    c.check(mqtt_ok == kTrials, "MQTT random round trips");

    Rng frame_rng(6);
    int frame_ok = 0;
    for (int i = 0; i < kTrials; ++i) {
        const auto f = test::random_frame(frame_rng);
        frame_ok += decode_frame(encode_frame(f)) == f;
    }
    c.check(frame_ok == kTrials, "frame random round trips");

    const double elapsed = seconds_since(t0);
    c.check(elapsed < 10.0, "runtime < 10 s");
    c.note(std::to_string(mqtt_ok) + " mqtt + " + std::to_string(frame_ok) + " frame round trips in " +
           format_double(std::round(elapsed * 1000.0) / 1000.0) + " s");
}

void end_to_end(Criterion& c)
{
    const auto sc = load_scenario(repo_path("scenarios/five_nodes.json"));
    const double range = max_range(sc.channel, sc.gateway.radio.sensitivity_dbm);
    int inside = 0;
    for (const auto& n : sc.nodes) {
        inside += haversine_m(sc.gateway.position, n.position) < range;
    }
    c.check(sc.nodes.size() == 5 && inside == 3, "scenario has 3 nodes inside range and 2 outside");
    c.check(sc.gateway.radio.shadowing_sigma_db == 0.0 && sc.duration_s == 600.0, "sigma 0, 10 minutes");

    const auto t0 = Clock::now();
    const auto r = run(sc);
    const double elapsed = seconds_since(t0);
    c.check(elapsed < 5.0, "runtime < 5 s");
    c.check(r.store->node_ids().size() == 3, "monitor holds exactly 3 nodes");
    for (const auto id : r.store->node_ids()) {
        c.check(haversine_m(sc.gateway.position, sc.nodes.at(id - 1u).position) < range,
                "stored node " + std::to_string(id) + " is inside range");
    }

    const auto& g = r.gateway;
    c.check(r.frames_emitted > 0, "frames emitted");
    c.check(r.frames_emitted == g.delivered + g.lost_rssi + g.lost_collision + g.corrupt, "emitted = received + lost");
    c.check(g.delivered == g.published + g.duplicates + g.queue_drops, "received = published + dropped");
    c.check(r.broker.publishes_in == g.published, "broker saw every publish");
    c.check(r.broker.deliveries == r.monitor.ingested + r.monitor.duplicates + r.monitor.rejected,
            "broker deliveries = monitor intake");
    c.check(r.monitor.ingested == r.store->size(), "monitor ingested = stored");
    std::uint64_t emitted = 0;
    std::uint64_t delivered = 0;
    for (const auto& n : r.per_node) {
        emitted += n.emitted;
        delivered += n.delivered;
        c.check(n.emitted == n.delivered + n.lost_rssi + n.lost_collision,
                "node " + std::to_string(n.node_id) + " balances");
    }
    c.check(emitted == r.frames_emitted && delivered == g.delivered, "per-node totals match");

    const auto again = run(sc);
    c.check(again.telemetry_jsonl == r.telemetry_jsonl, "telemetry byte-identical on rerun");
    c.check(again.stats_json() == r.stats_json(), "stats byte-identical on rerun");
    c.check(again.delivery_curve_csv() == r.delivery_curve_csv(), "delivery curve byte-identical on rerun");
    c.note("emitted=" + std::to_string(r.frames_emitted) + " delivered=" + std::to_string(g.delivered) +
           " lost_rssi=" + std::to_string(g.lost_rssi) + " lost_collision=" + std::to_string(g.lost_collision) +
           " in " + format_double(std::round(elapsed * 1000.0) / 1000.0) + " s");
}

std::vector<std::string> probe(const ReadingStore& store, const Scenario& sc)
{
    MonitorApiConfig cfg;
    cfg.gateways[sc.gateway.gateway_id] = sc.gateway.position;
    MonitorApi api(store, cfg);
    std::vector<std::string> targets = {"/api/nodes", "/api/stats", "/api/rssi/fit", "/api/rssi/fit?unit_m=1",
                                        "/api/snapshot", "/api/export.csv", "/api/nodes/99/readings"};
    for (const auto& n : sc.nodes) {
        const auto id = std::to_string(n.node_id);
        targets.push_back("/api/nodes/" + id + "/readings");
        targets.push_back("/api/nodes/" + id + "/readings?smoothing=mean&window=3");
        targets.push_back("/api/nodes/" + id + "/readings?smoothing=weighted&window=5");
        targets.push_back("/api/nodes/" + id + "/readings?from=1000&to=5000");
        targets.push_back("/api/export.csv?node=" + id);
    }
    std::vector<std::string> out;
    for (const auto& t : targets) {
        const auto resp = api.get(t, 7200.0);
        out.push_back(t + " " + std::to_string(resp.status) + " " + resp.content_type + "\n" + resp.body);
    }
    return out;
}

void durability(Criterion& c)
{
    auto sc = load_scenario(repo_path("scenarios/five_nodes.json"));
    sc.duration_s = 7200.0;
    sc.gateway.radio.shadowing_sigma_db = 3.0;

    const fs::path dir = fs::temp_directory_path() / ("marine_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path log = dir / "telemetry.jsonl";

    // The child writes the log and is SIGKILLed before any orderly shutdown.
    const pid_t pid = ::fork();
    if (pid == 0) {
        RunOptions opts;
        opts.telemetry_log = log;
        [[maybe_unused]] const auto r = run(sc, opts);
        ::raise(SIGKILL);
        ::_exit(0);
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    c.check(pid > 0 && WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL, "writer process was killed");

    const auto live = run(sc);
    const auto expected = probe(*live.store, sc);
    c.check(test::read_text(log.string()) == live.telemetry_jsonl, "log on disk equals the live run's log");

    const ReadingStore replayed(log);
    c.check(replayed.replay_skipped() == 0, "clean log replays without skips");
    c.check(probe(replayed, sc) == expected, "replayed store answers the probe set identically");

    // A write torn by the kill leaves a partial last line behind.
    {
        std::ofstream out(log, std::ios::binary | std::ios::app);
        out << R"({"node_id":1,"seq":9999,"ts":)";
    }
    const ReadingStore torn(log);
    c.check(torn.replay_skipped() == 1, "torn tail is skipped");
    c.check(probe(torn, sc) == expected, "torn log answers the probe set identically");

    c.note(std::to_string(expected.size()) + " probes over " + std::to_string(live.store->size()) + " readings");
    fs::remove_all(dir);
}

void smoothing(Criterion& c)
{
    const std::vector<SeriesPoint> three = {{0, 10}, {1, 20}, {2, 30}};
    const auto s = smooth(three, SmoothingSpec::mean(3));
    c.check(s.size() == 3 && s[1].value == 20.0, "mean window 3 on [10,20,30] gives center 20");

    Rng rng(8);
    int fixed = 0;
    int preserved = 0;
    constexpr int kSeries = 1000;
    for (int i = 0; i < kSeries; ++i) {
        const auto n = static_cast<std::size_t>(rng.uniform(0.0, 60.0));
        const double level = rng.uniform(-50.0, 50.0);
        std::vector<SeriesPoint> constant;
        std::vector<SeriesPoint> noisy;
        for (std::size_t k = 0; k < n; ++k) {
            constant.push_back({static_cast<double>(k), level});
            noisy.push_back({static_cast<double>(k) * 30.0, rng.normal(level, 5.0)});
        }
        const std::size_t window = 1 + 2 * static_cast<std::size_t>(rng.uniform(0.0, 5.0));
        const SmoothingSpec spec = rng.uniform() < 0.5 ? SmoothingSpec::mean(window) : SmoothingSpec::weighted(window);
        fixed += smooth(constant, spec) == constant;

        const auto out = smooth(noisy, spec);
        bool same_times = out.size() == noisy.size();
        for (std::size_t k = 0; same_times && k < n; ++k) {
            same_times = out[k].t == noisy[k].t;
        }
        preserved += same_times;
    }
    c.check(fixed == kSeries, "constant series are fixed points");
    c.check(preserved == kSeries, "length and timestamps preserved on 1k random series");
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<void(Criterion&)>>> criteria = {
        {"1 noiseless fit reproduces the model", noiseless_fit},
        {"2 noisy fit R^2 band and frozen golden", noisy_fit},
        {"3 max range and noiseless sweep cliff", range_consistency},
        {"4 urban reliable boundary", urban_boundary},
        {"5 protocol byte-exactness", protocol_codecs},
        {"6 end-to-end five-node pipeline", end_to_end},
        {"7 kill-and-replay durability", durability},
        {"8 smoothing", smoothing},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Criterion c;
        try {
            fn(c);
        } catch (const std::exception& e) {
            c.check(false, std::string("exception: ") + e.what());
        }
        std::cout << (c.passed() ? "PASS" : "FAIL") << "  " << name;
        for (const auto& n : c.notes()) {
            std::cout << "  [" << n << "]";
        }
        std::cout << "\n";
        for (const auto& f : c.failures()) {
            std::cout << "      failed: " << f << "\n";
        }
        failed += !c.passed();
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
    return failed;
}
