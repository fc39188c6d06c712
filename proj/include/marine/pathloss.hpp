#pragma once

// Log-distance RSSI model: rssi = a * ln(d / unit) + b.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "marine/rng.hpp"

namespace marine {

struct PathLossModel {
    double a = -22.06;   ///< dBm per natural-log unit of normalized distance
    double b = -50.194;  ///< dBm at one distance unit
    std::optional<double> r_squared;
    double distance_unit_m = 60.0;

    /// The measured sea-surface fit: y = -22.06 ln(x) - 50.194, x in 60 m units.
    static PathLossModel reference() { return {}; }
};

struct RssiSample {
    double distance_m = 0.0;
    double rssi_dbm = 0.0;
};

struct RadioParams {
    double sensitivity_dbm = -132.0;   // SX1278
    double shadowing_sigma_db = 3.0;
    double capture_threshold_db = 6.0;
};

enum class PathLossErrc {
    domain,            ///< non-positive distance or invalid parameter
    no_solution,       ///< max_range has no finite answer
    insufficient_data, ///< fewer than two samples
    singular_fit,      ///< all distances identical
    degenerate_data,   ///< zero variance in rssi
};

class PathLossError : public std::runtime_error {
public:
    PathLossError(PathLossErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    PathLossErrc code() const noexcept { return code_; }

private:
    PathLossErrc code_;
};

/// Deterministic RSSI at `distance_m`. Throws PathLossError{domain} for d <= 0.
double rssi_at(const PathLossModel& model, double distance_m);

/// Distance at which the model crosses `sensitivity_dbm`.
double max_range(const PathLossModel& model, double sensitivity_dbm);

/// Ordinary least squares of rssi on ln(d / unit_m). Fills r_squared.
PathLossModel fit_log_model(std::span<const RssiSample> samples, double unit_m = 60.0);

/// Coefficient of determination of `model` over `samples`.
double r_squared(std::span<const RssiSample> samples, const PathLossModel& model);

struct Reception {
    bool received = false;
    double rssi_dbm = 0.0; ///< rssi including the shadowing draw
};

/// Applies one shadowing draw to `rssi_dbm` and compares against sensitivity.
/// No draw is consumed when sigma is zero.
Reception draw_reception(double rssi_dbm, const RadioParams& params, Rng& rng);

/// True when the shadowed rssi is at or above the receiver sensitivity.
bool receive_decision(double rssi_dbm, const RadioParams& params, Rng& rng);

/// Model rssi at each distance plus an independent N(0, sigma) draw, in order.
std::vector<RssiSample> synthesize_samples(const PathLossModel& model, std::span<const double> distances_m,
                                           double sigma_db, Rng& rng);

// CSV interface: header `distance_m,rssi_dbm`, LF line endings.
std::vector<RssiSample> parse_samples_csv(std::string_view text);
std::string format_samples_csv(std::span<const RssiSample> samples);

/// {"a":..,"b":..,"r_squared":..,"distance_unit_m":..}
std::string fit_to_json(const PathLossModel& model);
PathLossModel fit_from_json(std::string_view text);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

} // namespace marine
