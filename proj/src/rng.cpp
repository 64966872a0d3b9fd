#include "lockin/rng.hpp"

#include <array>

namespace lockin {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x6c6f636bu};
    return std::mt19937_64(seq);
}

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_index)
    : seed_(seed), stream_index_(stream_index), engine_(make_engine(seed, stream_index))
{
}

double RngStream::uniform_open()
{
    // 53 random bits, shifted off zero.
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform_open(); }

double RngStream::normal() { return normal_(engine_); }

RngStream RngStream::split(std::uint64_t index) const
{
    return RngStream(mix(seed_ ^ mix(stream_index_)), index);
}

} // namespace lockin
