#include "marine/monitor/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace marine {

SmoothingSpec SmoothingSpec::weighted(std::size_t window, std::vector<double> weights)
{
    if (weights.empty() && window % 2 == 1) {
        if (window == 5) {
            weights = {0.1, 0.2, 0.4, 0.2, 0.1};
        } else {
            const auto half = static_cast<double>(window / 2);
            double total = 0.0;
            for (std::size_t i = 0; i < window; ++i) {
                weights.push_back(half + 1.0 - std::abs(static_cast<double>(i) - half));
                total += weights.back();
            }
            for (auto& w : weights) {
                w /= total;
            }
        }
    }
    return {SmoothingKind::weighted, window, std::move(weights)};
}

void SmoothingSpec::validate() const
{
    if (window == 0 || window % 2 == 0) {
        throw std::invalid_argument("smoothing window must be odd and >= 1, got " + std::to_string(window));
    }
    if (kind != SmoothingKind::weighted) {
        return;
    }
    if (weights.size() != window) {
        throw std::invalid_argument("weights length must equal the window");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
        if (!(weights[i] >= 0.0) || std::abs(weights[i] - weights[window - 1 - i]) > 1e-12) {
            throw std::invalid_argument("weights must be non-negative and symmetric");
        }
        sum += weights[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("weights must sum to 1");
    }
}

SmoothingKind parse_smoothing_kind(std::string_view name)
{
    if (name == "none" || name.empty()) {
        return SmoothingKind::none;
    }
    if (name == "mean") {
        return SmoothingKind::mean;
    }
    if (name == "weighted") {
        return SmoothingKind::weighted;
    }
    throw std::invalid_argument("unknown smoothing '" + std::string(name) + "'");
}

std::string_view to_string(SmoothingKind kind)
{
    switch (kind) {
    case SmoothingKind::none: return "none";
    case SmoothingKind::mean: return "mean";
    case SmoothingKind::weighted: return "weighted";
    }
    return "none";
}

std::vector<SeriesPoint> smooth(std::span<const SeriesPoint> series, const SmoothingSpec& spec)
{
    std::vector<SeriesPoint> out(series.begin(), series.end());
    if (spec.kind == SmoothingKind::none || spec.window == 1) {
        return out;
    }
    spec.validate();
    const auto n = static_cast<std::ptrdiff_t>(series.size());
    const auto half = static_cast<std::ptrdiff_t>(spec.window / 2);
    // Accumulate deviations from the center sample so that constant runs are
    // exact fixed points; the clamp keeps rounding inside the window's range.
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double center = series[static_cast<std::size_t>(i)].value;
        double acc = 0.0;
        double norm = 0.0;
        double lo = center;
        double hi = center;
        for (std::ptrdiff_t k = -half; k <= half; ++k) {
            const auto j = i + k;
            if (j < 0 || j >= n) {
                continue;
            }
            const double v = series[static_cast<std::size_t>(j)].value;
            const double w = spec.kind == SmoothingKind::mean ? 1.0 : spec.weights[static_cast<std::size_t>(k + half)];
            acc += w * (v - center);
            norm += w;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double smoothed = norm > 0.0 ? center + acc / norm : center;
        out[static_cast<std::size_t>(i)].value = std::clamp(smoothed, lo, hi);
    }
    return out;
}

} // namespace marine
