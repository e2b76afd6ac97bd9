#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace pathwise {

// Counter-derived per-stream RNG. Each Monte Carlo path owns an independent
// stream keyed by (seed, stream index, generator tag), so ensembles can be
// filled in any order and by any number of workers without changing a single
// drawn number.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// xoshiro256** by Blackman and Vigna, seeded through splitmix64.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag) {
        std::uint64_t sm = seed;
        sm ^= 0x632be59bd9b4e019ULL * (stream + 1);
        sm ^= tag * 0xd1b54a32d192ed03ULL;
        for (auto& w : state_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
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

    // uniform on (0, 1]; never returns 0 so log() below is safe
    double next_uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; pairs are cached
    double next_gaussian() {
        if (have_cache_) {
            have_cache_ = false;
            return cache_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cache_ = r * std::sin(a);
        have_cache_ = true;
        return r * std::cos(a);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
    double cache_ = 0.0;
    bool have_cache_ = false;
};

// Stream for one path of one generator.
inline Rng path_rng(std::uint64_t seed, std::size_t path_index, std::string_view generator_tag) {
    return Rng(seed, static_cast<std::uint64_t>(path_index), fnv1a64(generator_tag));
}

} // namespace pathwise
