#pragma once

#include <cstdint>
#include <random>

namespace marine {

/// Seeded random source shared by every stochastic part of the simulator.
///
/// Built on std::mt19937_64, whose output sequence is fixed by the standard.
/// The uniform and normal transforms are implemented here rather than with
/// std::uniform_real_distribution / std::normal_distribution, whose algorithms
/// are implementation-defined; golden outputs must not depend on the stdlib.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Gaussian via Box-Muller; the second variate of each pair is cached.
    double normal(double mean, double stddev);

    /// Independent stream derived from (seed, stream_id, purpose). Adding a
    /// stream never changes the draws of another one.
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t purpose = 0);

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

/// SplitMix64 finalizer, used for seed derivation.
std::uint64_t mix64(std::uint64_t x);

} // namespace marine
