#include "marine/pathloss.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace marine {

double rssi_at(const PathLossModel& model, double distance_m)
{
    if (!(distance_m > 0.0) || !std::isfinite(distance_m)) {
        throw PathLossError(PathLossErrc::domain, "distance must be positive, got " + format_double(distance_m));
    }
    if (!(model.distance_unit_m > 0.0)) {
        throw PathLossError(PathLossErrc::domain, "distance unit must be positive");
    }
    return model.a * std::log(distance_m / model.distance_unit_m) + model.b;
}

double max_range(const PathLossModel& model, double sensitivity_dbm)
{
    if (!(model.a < 0.0)) {
        throw PathLossError(PathLossErrc::no_solution, "slope must be negative for a finite range");
    }
    if (!(sensitivity_dbm <= model.b)) {
        throw PathLossError(PathLossErrc::no_solution,
                            "sensitivity " + format_double(sensitivity_dbm) + " dBm is above the intercept");
    }
    return model.distance_unit_m * std::exp((sensitivity_dbm - model.b) / model.a);
}

PathLossModel fit_log_model(std::span<const RssiSample> samples, double unit_m)
{
    if (samples.size() < 2) {
        throw PathLossError(PathLossErrc::insufficient_data, "need at least two samples to fit");
    }
    if (!(unit_m > 0.0)) {
        throw PathLossError(PathLossErrc::domain, "distance unit must be positive");
    }
    const double first = samples.front().distance_m;
    const bool all_same = std::all_of(samples.begin(), samples.end(),
                                      [first](const RssiSample& s) { return s.distance_m == first; });
    if (all_same) {
        throw PathLossError(PathLossErrc::singular_fit, "all samples share one distance");
    }

    std::vector<double> u;
    u.reserve(samples.size());
    double mean_u = 0.0;
    double mean_y = 0.0;
    for (const auto& s : samples) {
        if (!(s.distance_m > 0.0)) {
            throw PathLossError(PathLossErrc::domain, "sample distance must be positive");
        }
        u.push_back(std::log(s.distance_m / unit_m));
        mean_u += u.back();
        mean_y += s.rssi_dbm;
    }
    const auto n = static_cast<double>(samples.size());
    mean_u /= n;
    mean_y /= n;

    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double du = u[i] - mean_u;
        sxx += du * du;
        sxy += du * (samples[i].rssi_dbm - mean_y);
    }
    if (!(sxx > 0.0)) {
        throw PathLossError(PathLossErrc::singular_fit, "distances carry no spread in log space");
    }

    PathLossModel model;
    model.a = sxy / sxx;
    model.b = mean_y - model.a * mean_u;
    model.distance_unit_m = unit_m;
    model.r_squared = std::clamp(r_squared(samples, model), 0.0, 1.0);
    return model;
}

double r_squared(std::span<const RssiSample> samples, const PathLossModel& model)
{
    if (samples.size() < 2) {
        throw PathLossError(PathLossErrc::insufficient_data, "need at least two samples");
    }
    double mean_y = 0.0;
    for (const auto& s : samples) {
        mean_y += s.rssi_dbm;
    }
    mean_y /= static_cast<double>(samples.size());

    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (const auto& s : samples) {
        const double resid = s.rssi_dbm - rssi_at(model, s.distance_m);
        const double dev = s.rssi_dbm - mean_y;
        ss_res += resid * resid;
        ss_tot += dev * dev;
    }
    if (!(ss_tot > 0.0)) {
        throw PathLossError(PathLossErrc::degenerate_data, "rssi values have zero variance");
    }
    return 1.0 - ss_res / ss_tot;
}

Reception draw_reception(double rssi_dbm, const RadioParams& params, Rng& rng)
{
    double measured = rssi_dbm;
    if (params.shadowing_sigma_db > 0.0) {
        measured += rng.normal(0.0, params.shadowing_sigma_db);
    }
    return {measured >= params.sensitivity_dbm, measured};
}

bool receive_decision(double rssi_dbm, const RadioParams& params, Rng& rng)
{
    return draw_reception(rssi_dbm, params, rng).received;
}

std::vector<RssiSample> synthesize_samples(const PathLossModel& model, std::span<const double> distances_m,
                                           double sigma_db, Rng& rng)
{
    std::vector<RssiSample> out;
    out.reserve(distances_m.size());
    for (double d : distances_m) {
        double rssi = rssi_at(model, d);
        if (sigma_db > 0.0) {
            rssi += rng.normal(0.0, sigma_db);
        }
        out.push_back({d, rssi});
    }
    return out;
}

namespace {

double parse_number(std::string_view field, std::size_t line_no)
{
    double value = 0.0;
    const auto* begin = field.data();
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": not a number: '" + std::string(field) + "'");
    }
    return value;
}

} // namespace

std::vector<RssiSample> parse_samples_csv(std::string_view text)
{
    std::vector<RssiSample> out;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            continue;
        }
        if (!header_seen) {
            if (line != "distance_m,rssi_dbm") {
                throw std::invalid_argument("line 1: expected header 'distance_m,rssi_dbm'");
            }
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected two fields");
        }
        RssiSample s{parse_number(line.substr(0, comma), line_no), parse_number(line.substr(comma + 1), line_no)};
        if (!(s.distance_m > 0.0) || !std::isfinite(s.distance_m)) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": distance_m must be positive");
        }
        if (!std::isfinite(s.rssi_dbm)) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": rssi_dbm must be finite");
        }
        out.push_back(s);
    }
    if (!header_seen) {
        throw std::invalid_argument("empty sample file");
    }
    return out;
}

std::string format_samples_csv(std::span<const RssiSample> samples)
{
    std::string out = "distance_m,rssi_dbm\n";
    for (const auto& s : samples) {
        out += format_double(s.distance_m);
        out += ',';
        out += format_double(s.rssi_dbm);
        out += '\n';
    }
    return out;
}

std::string fit_to_json(const PathLossModel& model)
{
    nlohmann::ordered_json j;
    j["a"] = model.a;
    j["b"] = model.b;
    j["r_squared"] = model.r_squared ? nlohmann::ordered_json(*model.r_squared) : nlohmann::ordered_json(nullptr);
    j["distance_unit_m"] = model.distance_unit_m;
    return j.dump();
}

PathLossModel fit_from_json(std::string_view text)
{
    const auto j = nlohmann::json::parse(text);
    PathLossModel m;
    m.a = j.at("a").get<double>();
    m.b = j.at("b").get<double>();
    if (j.contains("r_squared") && !j["r_squared"].is_null()) {
        m.r_squared = j["r_squared"].get<double>();
    }
    m.distance_unit_m = j.value("distance_unit_m", 60.0);
    return m;
}

std::string format_double(double value)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

} // namespace marine
