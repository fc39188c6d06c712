#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "marine/geo.hpp"
#include "marine/pathloss.hpp"
#include "marine/runner.hpp"
#include "marine/scenario.hpp"
#include "test_support.hpp"

using namespace marine;

namespace {

std::string one_node(double distance_m, double duration_s, double sigma, const std::string& extra = "")
{
    return R"({"seed": 42, "duration_s": )" + std::to_string(duration_s) +
           R"(, "gateway": {"lat": 20.0, "lon": 110.0}, "channel": {"shadowing_sigma_db": )" + std::to_string(sigma) +
           "}" + extra + R"(, "nodes": [{"node_id": 9, "distance_m": )" + std::to_string(distance_m) +
           R"(, "bearing_deg": 90}]})";
}

ScenarioError parse_error(const std::string& text)
{
    try {
        parse_scenario(text);
    } catch (const ScenarioError& e) {
        return e;
    }
    FAIL("expected a ScenarioError");
    return ScenarioError("", 0, "");
}

Scenario sweep_template(double sigma, bool urban, double duration_s)
{
    auto sc = parse_scenario(one_node(60.0, duration_s, sigma, urban ? R"(, "environment": {"preset": "urban"})" : ""));
    return sc;
}

} // namespace

TEST_CASE("minimal scenario gets every default")
{
    const auto sc = load_scenario(std::string(MARINE_TEST_DATA) + "/../../scenarios/minimal.json");
    CHECK(sc.scenario_version == 1);
    CHECK(sc.seed == 1);
    CHECK(sc.duration_s == 3600.0);
    CHECK(sc.tick_s == 1.0);
    CHECK(sc.environment == EnvironmentPreset::open);
    CHECK(sc.urban_extra_loss_db == 12.0);
    CHECK(sc.channel.a == -22.06);
    CHECK(sc.channel.b == -50.194);
    CHECK(sc.channel.distance_unit_m == 60.0);
    CHECK(sc.gateway.gateway_id == "gw1");
    CHECK(sc.gateway.radio.sensitivity_dbm == -132.0);
    CHECK(sc.gateway.radio.shadowing_sigma_db == 3.0);
    CHECK(sc.gateway.radio.capture_threshold_db == 6.0);
    CHECK(sc.gateway.topic_prefix == "marine/v1");
    REQUIRE(sc.nodes.size() == 1);
    const auto& n = sc.nodes[0];
    CHECK(n.node_id == 1);
    CHECK(n.sample_period_s == 60.0);
    CHECK(n.battery_capacity_mah == 10400.0);
    CHECK(n.solar_panel_count == 6);
    CHECK(n.tx_jitter_s == 5.0);
    CHECK(n.started);
}

TEST_CASE("duplicate node ids are named")
{
    const auto e = parse_error(test::read_text(test::data_path("scenarios/duplicate_ids.json")));
    CHECK(std::string(e.what()).find("duplicate node id 3") != std::string::npos);
    CHECK(e.field() == "nodes[1].node_id");
    CHECK(e.line() == 8);
}

TEST_CASE("negative duration is rejected")
{
    const auto e = parse_error(test::read_text(test::data_path("scenarios/negative_duration.json")));
    CHECK(e.field() == "duration_s");
    CHECK(e.line() == 4);
}

TEST_CASE("schema errors carry field and line")
{
    auto e = parse_error("{\n \"seed\": 1,\n \"duration_s\": 10,\n \"gateway\": {\"lat\": 1, \"lon\": 2},\n \"nodes\": [],\n \"colour\": 3\n}");
    CHECK(e.field() == "colour");
    CHECK(e.line() == 6);

    e = parse_error(R"({"seed": 1, "duration_s": 10, "gateway": {"lat": 1, "lon": 2}, "nodes": [{"node_id": 1}]})");
    CHECK(e.field().find("nodes[0]") == 0);

    e = parse_error("{\"seed\": 1,");
    CHECK(e.line() == 1);

    e = parse_error(R"({"scenario_version": 2, "seed": 1, "duration_s": 10, "gateway": {"lat": 1, "lon": 2}, "nodes": []})");
    CHECK(e.field() == "scenario_version");

    e = parse_error(R"({"seed": 1, "duration_s": 10, "tick_s": 0, "gateway": {"lat": 1, "lon": 2}, "nodes": []})");
    CHECK(e.field() == "tick_s");

    e = parse_error(R"({"seed": 1, "duration_s": 10, "gateway": {"lat": 91, "lon": 2}, "nodes": []})");
    CHECK(e.field() == "gateway.lat");

    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ScenarioError);
}

TEST_CASE("nodes placed by distance and bearing")
{
    const auto sc = parse_scenario(one_node(1000.0, 60.0, 0.0));
    CHECK(haversine_m(sc.gateway.position, sc.nodes[0].position) == doctest::Approx(1000.0).epsilon(1e-4));
    CHECK(sc.nodes[0].position == quantize_e7(sc.nodes[0].position));
}

TEST_CASE("one node at 60 m stores ten readings at the reference rssi")
{
    const auto sc = parse_scenario(one_node(60.0, 600.0, 0.0));
    // e7 position rounding moves the node by a few millimetres
    const double d = haversine_m(sc.gateway.position, sc.nodes.front().position);
    CHECK(std::abs(d - 60.0) < 0.006);
    const double expected = rssi_at(sc.channel, d);
    CHECK(expected == doctest::Approx(-50.194).epsilon(1e-4));
    const auto r = run(sc);
    CHECK(r.frames_emitted == 10);
    CHECK(r.store->size() == 10);
    for (const auto& rec : r.store->all_readings()) {
        CHECK(std::abs(rec.rssi_dbm - expected) < 1e-9);
    }
}

TEST_CASE("one node at 5 km loses everything to rssi")
{
    const auto sc = parse_scenario(one_node(5000.0, 600.0, 0.0));
    const auto r = run(sc);
    CHECK(r.frames_emitted == 10);
    CHECK(r.store->size() == 0);
    CHECK(r.gateway.lost_rssi == 10);
    CHECK(r.telemetry_jsonl.empty());
    CHECK_FALSE(r.fit);
}

TEST_CASE("runs are deterministic")
{
    const auto sc = load_scenario(std::string(MARINE_TEST_DATA) + "/../../scenarios/five_nodes.json");
    const auto a = run(sc);
    const auto b = run(sc);
    CHECK(a.telemetry_jsonl == b.telemetry_jsonl);
    CHECK(a.stats_json() == b.stats_json());
    CHECK(a.delivery_curve_csv() == b.delivery_curve_csv());
    auto other = sc;
    other.seed = sc.seed + 1;
    CHECK(run(other).telemetry_jsonl != a.telemetry_jsonl);
}

TEST_CASE("adding a node leaves other nodes' draws untouched")
{
    auto sc = parse_scenario(one_node(1500.0, 3600.0, 3.0));
    const auto alone = run(sc);
    NodeConfig far = sc.nodes[0];
    far.node_id = 2;
    far.position = quantize_e7(destination(sc.gateway.position, 9000.0, 0.0)); // never heard, never collides
    sc.nodes.push_back(far);
    const auto both = run(sc);
    CHECK(both.store->readings(9, 0, 1e9) == alone.store->readings(9, 0, 1e9));
}

TEST_CASE("conservation counters balance")
{
    auto sc = load_scenario(std::string(MARINE_TEST_DATA) + "/../../scenarios/five_nodes.json");
    sc.gateway.radio.shadowing_sigma_db = 3.0;
    sc.duration_s = 7200.0;
    for (auto& n : sc.nodes) {
        n.sample_period_s = 20.0;
        n.tx_jitter_s = 10.0;
        n.airtime_s = 1.0; // provoke collisions
    }
    const auto r = run(sc);
    const auto& g = r.gateway;
    CHECK(g.lost_collision > 0);
    CHECK(r.frames_emitted == g.delivered + g.lost_rssi + g.lost_collision + g.corrupt);
    CHECK(g.delivered == g.published + g.duplicates + g.queue_drops);
    CHECK(g.published == r.monitor.ingested);
    CHECK(r.broker.publishes_in == g.published);
    std::uint64_t emitted = 0;
    for (const auto& n : r.per_node) {
        emitted += n.emitted;
        CHECK(n.emitted == n.delivered + n.lost_rssi + n.lost_collision);
    }
    CHECK(emitted == r.frames_emitted);
}

TEST_CASE("outputs are written")
{
    const auto sc = load_scenario(std::string(MARINE_TEST_DATA) + "/../../scenarios/five_nodes.json");
    const auto dir = std::filesystem::temp_directory_path() / "marine_test_outputs";
    std::filesystem::remove_all(dir);
    const auto r = run(sc);
    write_outputs(r, dir);
    CHECK(test::read_text((dir / "telemetry.jsonl").string()) == r.telemetry_jsonl);
    CHECK(test::read_text((dir / "stats.json").string()) == r.stats_json());
    const auto fit = fit_from_json(test::read_text((dir / "fit.json").string()));
    CHECK(std::abs(fit.a - (-22.06)) < 1e-9);
    CHECK(parse_samples_csv(test::read_text((dir / "rssi_samples.csv").string())).size() == r.store->size());
    std::filesystem::remove_all(dir);
}

TEST_CASE("telemetry log option persists what the monitor stored")
{
    const auto sc = parse_scenario(one_node(300.0, 600.0, 0.0));
    const auto log = std::filesystem::temp_directory_path() / "marine_test_runner_log.jsonl";
    std::filesystem::remove(log);
    const auto r = run(sc, RunOptions{log});
    CHECK(test::read_text(log.string()) == r.telemetry_jsonl);
    std::filesystem::remove(log);
}

TEST_CASE("noiseless sweep recovers the channel exactly")
{
    const auto grid = distance_grid(60.0, 2400.0, 60.0);
    REQUIRE(grid.size() == 40);
    const auto rep = sweep_range(sweep_template(0.0, false, 600.0), grid);
    REQUIRE(rep.fit);
    CHECK(std::abs(rep.fit->a - (-22.06)) < 1e-9);
    CHECK(std::abs(rep.fit->b - (-50.194)) < 1e-9);
    CHECK(*rep.fit->r_squared == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& p : rep.points) {
        CHECK(p.delivery_ratio() == 1.0);
    }
}

TEST_CASE("noisy sweep is monotone and matches its frozen curve")
{
    const auto grid = distance_grid(60.0, 2400.0, 60.0);
    const auto rep = sweep_range(sweep_template(3.0, false, 3600.0), grid);
    for (std::size_t i = 1; i < rep.points.size(); ++i) {
        CHECK(rep.points[i].delivery_ratio() <= rep.points[i - 1].delivery_ratio());
    }
    REQUIRE(rep.fit);
    CHECK(*rep.fit->r_squared >= 0.90);
    CHECK(rep.curve_csv() == test::read_text(test::data_path("golden/sweep_sigma3_seed42.csv")));
}

TEST_CASE("urban boundary is shorter than open")
{
    const auto grid = distance_grid(60.0, 3000.0, 60.0);
    const auto open = sweep_range(sweep_template(3.0, false, 3600.0), grid).reliable_boundary_m();
    const auto urban = sweep_range(sweep_template(3.0, true, 3600.0), grid).reliable_boundary_m();
    REQUIRE(open);
    REQUIRE(urban);
    CHECK(*urban < *open);
}

TEST_CASE("sweep and grid input checks")
{
    CHECK_THROWS_AS(distance_grid(0.0, 100.0, 10.0), std::invalid_argument);
    CHECK_THROWS_AS(distance_grid(10.0, 100.0, 0.0), std::invalid_argument);
    const std::vector<double> single = {100.0};
    CHECK_THROWS_AS(sweep_range(sweep_template(0.0, false, 600.0), single), std::invalid_argument);
    CHECK(distance_grid(60.0, 180.0, 60.0) == std::vector<double>{60.0, 120.0, 180.0});
}
