#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <utility>
#include <vector>

namespace prefrank::rng {

// splitmix64 finalizer (Steele et al.). Used both as a stream and as the
// mixing step for keyed, counter-based draws.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Combine a seed with key words into a single 64-bit value. Each word is
/// absorbed through a full splitmix64 round, so (seed, a, b) and (seed, b, a)
/// land in unrelated streams.
constexpr std::uint64_t mix_key(std::uint64_t seed, std::initializer_list<std::uint64_t> words) {
    std::uint64_t h = splitmix64_mix(seed);
    for (std::uint64_t w : words) h = splitmix64_mix(h ^ w);
    return h;
}

/// Deterministic uniform 64-bit value addressed purely by key, independent of
/// call order or thread schedule.
constexpr std::uint64_t keyed_u64(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                  std::uint64_t c) {
    return mix_key(seed, {a, b, c});
}

/// Fair coin addressed by (seed, a, b, c).
constexpr bool keyed_coin(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return (keyed_u64(seed, a, b, c) >> 63) != 0;
}

/// Derive an independent stream seed from a parent seed and a tag.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix_key(seed, {tag});
}

// xoshiro256** (Blackman & Vigna). Sequential stream for model generation and
// shuffles; self-contained so output is identical across standard libraries.
class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) {
            s += 0x9e3779b97f4a7c15ULL;
            word = splitmix64_mix(s);
        }
    }

    using result_type = std::uint64_t;
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~0ULL; }

    std::uint64_t operator()() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
};

/// Uniform double in [0, 1) with 53 random bits.
template <class Rng>
double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
template <class Rng>
double uniform_range(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

/// Unbiased uniform integer in [0, bound) via rejection.
template <class Rng>
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = ~0ULL - (~0ULL % bound + 1) % bound;
    std::uint64_t x = rng();
    while (x > limit) x = rng();
    return x % bound;
}

/// Standard normal via Marsaglia polar; one value per call (the pair's twin is
/// discarded to keep the stream position a pure function of the call count).
template <class Rng>
double normal(Rng& rng) {
    for (;;) {
        const double u = 2.0 * uniform_unit(rng) - 1.0;
        const double v = 2.0 * uniform_unit(rng) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

/// In-place Fisher-Yates shuffle.
template <class Rng, class T>
void shuffle(Rng& rng, std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace prefrank::rng
