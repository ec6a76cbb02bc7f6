#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace eqg::rng {

// splitmix64 step (Steele et al.). Used for seed derivation only; the
// generator proper is std::mt19937_64, whose output sequence is fixed by the
// standard, so every stream is reproducible bit for bit.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derive an independent child seed from (seed, stream). Distinct streams give
// decorrelated generators; walk i of a Monte Carlo run uses stream i so the
// aggregate is identical no matter how walks are scheduled.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
    return splitmix64(s);
}

// Seeded stream with portable floating-point draws. Distributions are built
// from raw 64-bit output directly instead of <random> adapters, which the
// standard leaves implementation-defined.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform on [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0,1); safe under log().
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound). Multiply-shift reduction; the tiny
    // modulo bias is irrelevant here and the mapping is fixed.
    std::uint64_t below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    // Standard Gumbel(0,1): g = -log(-log(U)).
    double gumbel() { return -std::log(-std::log(uniform_open())); }

private:
    std::mt19937_64 eng_;
};

// Index of the bin containing u * total in a cumulative weight array.
// cum must be non-decreasing with cum.back() == total > 0.
inline std::size_t pick_cumulative(std::span<const double> cum, double u) {
    const double target = u * cum.back();
    std::size_t lo = 0, hi = cum.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (cum[mid] <= target)
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo;
}

} // namespace eqg::rng
