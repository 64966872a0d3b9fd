#pragma once

#include <cstdint>
#include <random>

namespace lockin {

/// Seeded random stream. Two streams built from the same (seed, stream_index)
/// produce identical sequences; different indices give independent streams.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_index);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_index() const { return stream_index_; }

    /// Uniform on the open interval (0, 1).
    double uniform_open();
    /// Uniform on [lo, hi).
    double uniform(double lo, double hi);
    double normal();

    std::mt19937_64& engine() { return engine_; }

    /// Child stream for sub-task `index`; deterministic in (seed, stream, index).
    RngStream split(std::uint64_t index) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_index_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace lockin
