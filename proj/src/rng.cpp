#include "marine/rng.hpp"

#include <cmath>
#include <numbers>

namespace marine {

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

double Rng::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal(double mean, double stddev)
{
    if (has_cached_) {
        has_cached_ = false;
        return mean + stddev * cached_normal_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_normal_ = radius * std::sin(theta);
    has_cached_ = true;
    return mean + stddev * radius * std::cos(theta);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t purpose)
{
    const std::uint64_t derived = mix64(mix64(seed) ^ mix64(stream_id + 0x51ED27A3ull) ^ mix64(purpose + 0xC0FFEEull));
    return Rng(derived);
}

} // namespace marine
