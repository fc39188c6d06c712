// marinesim: scenario runs, range sweeps, offline fits and the live
// broker/monitor processes.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "marine/net/broker_server.hpp"
#include "marine/net/monitor_service.hpp"
#include "marine/net/socket.hpp"
#include "marine/pathloss.hpp"
#include "marine/runner.hpp"
#include "marine/scenario.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitInvalid = 2;

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << content;
}

/// Blocks until SIGINT/SIGTERM, or for `seconds` when positive.
void wait_for_shutdown(double seconds)
{
    if (seconds > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
        return;
    }
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    int sig = 0;
    sigwait(&set, &sig);
}

void block_signals()
{
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

marine::GeoPoint parse_gateway_arg(const std::string& spec, std::string& id)
{
    // ID,LAT,LON
    std::stringstream ss(spec);
    std::string lat, lon;
    if (!std::getline(ss, id, ',') || !std::getline(ss, lat, ',') || !std::getline(ss, lon) || id.empty()) {
        throw std::invalid_argument("--gateway expects ID,LAT,LON, got '" + spec + "'");
    }
    return {std::stod(lat), std::stod(lon)};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Marine buoy telemetry simulator"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, input_path, out_path, log_path, broker_addr = "127.0.0.1:1883";
    std::optional<std::uint64_t> seed;
    double min_d = 60.0, max_d = 3000.0, step_d = 60.0, unit_m = 60.0, serve_for = 0.0;
    std::uint16_t http_port = 8080, broker_port = 1883;
    std::string topic_prefix = "marine/v1";
    std::vector<std::string> gateway_args;

    auto* run_cmd = app.add_subcommand("run", "Run a scenario end to end");
    run_cmd->add_option("--scenario", scenario_path, "Scenario JSON")->required();
    run_cmd->add_option("--out", out_dir, "Output directory")->required();
    run_cmd->add_option("--seed", seed, "Override the scenario seed");

    auto* sweep_cmd = app.add_subcommand("sweep", "Delivery ratio and RSSI versus distance");
    sweep_cmd->add_option("--scenario", scenario_path, "Scenario JSON (first node is the probe)")->required();
    sweep_cmd->add_option("--min-d", min_d, "First distance in metres");
    sweep_cmd->add_option("--max-d", max_d, "Last distance in metres");
    sweep_cmd->add_option("--step", step_d, "Distance step in metres");
    sweep_cmd->add_option("--out", out_dir, "Output directory")->required();
    sweep_cmd->add_option("--seed", seed, "Override the scenario seed");

    auto* fit_cmd = app.add_subcommand("fit", "Fit the log-distance model to an RSSI CSV");
    fit_cmd->add_option("--input", input_path, "CSV with header distance_m,rssi_dbm")->required();
    fit_cmd->add_option("--unit-m", unit_m, "Distance unit of the log term");
    fit_cmd->add_option("--out", out_path, "fit.json path (stdout when omitted)");

    std::uint64_t synth_seed = 42;
    std::size_t synth_count = 40;
    double synth_sigma = 3.0;
    auto* synth_cmd = app.add_subcommand("synth", "Samples from the reference model at unit_m * k plus N(0, sigma)");
    synth_cmd->add_option("--seed", synth_seed, "RNG seed");
    synth_cmd->add_option("--count", synth_count, "Number of distances k = 1..count");
    synth_cmd->add_option("--sigma", synth_sigma, "Noise standard deviation in dB");
    synth_cmd->add_option("--unit-m", unit_m, "Grid step and model distance unit");
    synth_cmd->add_option("--out", out_path, "CSV path (stdout when omitted)");

    auto* serve_cmd = app.add_subcommand("serve", "Monitor: subscribe to telemetry and serve the REST API");
    serve_cmd->add_option("--port", http_port, "HTTP port");
    serve_cmd->add_option("--broker", broker_addr, "MQTT broker HOST:PORT");
    serve_cmd->add_option("--log", log_path, "Telemetry log (replayed on start)");
    serve_cmd->add_option("--gateway", gateway_args, "Gateway position ID,LAT,LON (repeatable)");
    serve_cmd->add_option("--topic-prefix", topic_prefix, "Telemetry topic prefix");
    serve_cmd->add_option("--unit-m", unit_m, "Default distance unit for /api/rssi/fit");
    serve_cmd->add_option("--duration", serve_for, "Exit after this many seconds (0: until signalled)");

    auto* broker_cmd = app.add_subcommand("broker", "Embedded MQTT broker");
    broker_cmd->add_option("--port", broker_port, "TCP port");
    broker_cmd->add_option("--duration", serve_for, "Exit after this many seconds (0: until signalled)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            auto sc = marine::load_scenario(scenario_path);
            if (seed) {
                sc.seed = *seed;
            }
            const auto report = marine::run(sc);
            marine::write_outputs(report, out_dir);
            std::cout << "frames_emitted=" << report.frames_emitted << " delivered=" << report.gateway.delivered
                      << " stored=" << report.monitor.ingested << "\n";
            if (report.fit) {
                std::cout << "fit a=" << marine::format_double(report.fit->a)
                          << " b=" << marine::format_double(report.fit->b) << "\n";
            } else {
                std::cout << "fit unavailable: " << report.fit_error << "\n";
            }
        } else if (*sweep_cmd) {
            auto sc = marine::load_scenario(scenario_path);
            if (seed) {
                sc.seed = *seed;
            }
            const auto grid = marine::distance_grid(min_d, max_d, step_d);
            const auto report = marine::sweep_range(sc, grid);
            const std::filesystem::path dir(out_dir);
            write_file(dir / "delivery_curve.csv", report.curve_csv());
            write_file(dir / "rssi_samples.csv", marine::format_samples_csv(report.samples));
            if (report.fit) {
                write_file(dir / "fit.json", marine::fit_to_json(*report.fit) + "\n");
            }
            const auto boundary = report.reliable_boundary_m();
            std::cout << "points=" << report.points.size() << " reliable_boundary_m="
                      << (boundary ? marine::format_double(*boundary) : std::string("none")) << "\n";
            if (!report.fit) {
                std::cout << "fit unavailable: " << report.fit_error << "\n";
            }
        } else if (*fit_cmd) {
            const auto samples = marine::parse_samples_csv(read_file(input_path));
            const auto json = marine::fit_to_json(marine::fit_log_model(samples, unit_m)) + "\n";
            if (out_path.empty()) {
                std::cout << json;
            } else {
                write_file(out_path, json);
            }
        } else if (*synth_cmd) {
            auto model = marine::PathLossModel::reference();
            model.distance_unit_m = unit_m;
            std::vector<double> distances;
            for (std::size_t k = 1; k <= synth_count; ++k) {
                distances.push_back(unit_m * static_cast<double>(k));
            }
            marine::Rng rng(synth_seed);
            const auto csv = marine::format_samples_csv(marine::synthesize_samples(model, distances, synth_sigma, rng));
            if (out_path.empty()) {
                std::cout << csv;
            } else {
                write_file(out_path, csv);
            }
        } else if (*serve_cmd) {
            block_signals();
            marine::net::MonitorServiceConfig cfg;
            cfg.http_port = http_port;
            std::tie(cfg.broker_host, cfg.broker_port) = marine::net::parse_host_port(broker_addr);
            cfg.topic_filter = topic_prefix + "/#";
            if (!log_path.empty()) {
                cfg.log_path = log_path;
            }
            cfg.api.default_unit_m = unit_m;
            for (const auto& g : gateway_args) {
                std::string id;
                const auto pos = parse_gateway_arg(g, id);
                cfg.api.gateways[id] = pos;
            }
            marine::net::MonitorService service(cfg);
            service.start();
            std::cout << "monitor listening on port " << service.http_port() << ", broker " << broker_addr
                      << std::endl;
            wait_for_shutdown(serve_for);
            service.stop();
        } else if (*broker_cmd) {
            block_signals();
            marine::net::BrokerServer server(broker_port);
            server.start();
            std::cout << "broker listening on port " << server.port() << std::endl;
            wait_for_shutdown(serve_for);
            server.stop();
        }
    } catch (const marine::ScenarioError& e) {
        std::cerr << "invalid scenario: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const marine::PathLossError& e) {
        std::cerr << "fit failed: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return EXIT_SUCCESS;
}
