#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace marine {

struct SeriesPoint {
    double t = 0.0;
    double value = 0.0;

    friend bool operator==(const SeriesPoint&, const SeriesPoint&) = default;
};

enum class SmoothingKind { none, mean, weighted };

struct SmoothingSpec {
    SmoothingKind kind = SmoothingKind::none;
    std::size_t window = 5;
    std::vector<double> weights; ///< weighted kind only; symmetric, sums to 1

    static SmoothingSpec none() { return {}; }
    static SmoothingSpec mean(std::size_t window = 5) { return {SmoothingKind::mean, window, {}}; }
    /// Weighted kind; window 5 without explicit weights uses [1,2,4,2,1]/10,
    /// other windows a triangular kernel.
    static SmoothingSpec weighted(std::size_t window = 5, std::vector<double> weights = {});

    /// Throws std::invalid_argument on an even/zero window or bad weights.
    void validate() const;
};

SmoothingKind parse_smoothing_kind(std::string_view name);
std::string_view to_string(SmoothingKind kind);

/// Centered moving (weighted) mean; edges renormalize over the samples that
/// exist. Output has the input's length and timestamps.
std::vector<SeriesPoint> smooth(std::span<const SeriesPoint> series, const SmoothingSpec& spec);

} // namespace marine
