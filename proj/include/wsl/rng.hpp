#pragma once

#include <cstdint>

// Counter-based random streams. Every (seed, stream, index) triple opens an
// independent splitmix64 sequence, so parallel consumers get identical draws
// no matter how work is divided between threads.

namespace wsl {

struct SplitMix64 {
    std::uint64_t s;

    explicit SplitMix64(std::uint64_t seed) : s(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 significant bits.
    double uniform()
    {
        return double(next() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [-half, half].
    double symmetric(double half)
    {
        return half * (2.0 * uniform() - 1.0);
    }
};

/// Stream keyed by (seed, stream, index): runs splitmix over the mixed key.
inline SplitMix64 keyed_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    SplitMix64 a(seed);
    SplitMix64 b(a.next() ^ (stream * 0xd1342543de82ef95ULL));
    SplitMix64 c(b.next() ^ (index * 0xaf251af3b0f025b5ULL));
    return SplitMix64(c.next());
}

}
