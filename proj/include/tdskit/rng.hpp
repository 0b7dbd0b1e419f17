#pragma once

#include <cmath>
#include <cstdint>

namespace tds::rng {

/// SplitMix64 finalizer. Good avalanche, cheap, and fully portable.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Key for an independent substream of a master seed. Streams keyed by
/// distinct (hi, lo) pairs never share draws, which lets parallel workers
/// produce the same bytes as a serial run.
inline std::uint64_t substream_key(std::uint64_t seed, std::uint64_t hi, std::uint64_t lo) {
    return mix64(mix64(mix64(seed) ^ hi) ^ lo);
}

/// Counter-based generator: the n-th draw is a pure function of (key, n).
/// Distribution sampling is spelled out explicitly so output depends only on
/// the seed, not on any library implementation.
class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key) {}
    Stream(std::uint64_t seed, std::uint64_t hi, std::uint64_t lo)
        : key_(substream_key(seed, hi, lo)) {}

    std::uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Fisher-Yates shuffle of an index container, driven by the stream.
template <typename Container>
void shuffle(Container& v, Stream& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace tds::rng
