#pragma once

#include <bit>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

#include "nsumkit/errors.hpp"

namespace nsumkit {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t key, std::uint64_t label) {
    std::uint64_t s = key ^ std::rotl(label, 17) ^ 0x6a09e667f3bcc909ULL;
    splitmix64(s);
    return splitmix64(s);
}

// FNV-1a; stable across platforms, used to turn text labels into path entries.
constexpr std::uint64_t hash_label(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

// xoshiro256** (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Engine {
public:
    using result_type = std::uint64_t;

    explicit Engine(std::uint64_t key) {
        std::uint64_t s = key;
        for (auto& w : state_) w = detail::splitmix64(s);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = std::rotl(state_[3], 45);
        return result;
    }

private:
    std::uint64_t state_[4];
};

// ---------------------------------------------------------------------------
// RngStream: a (seed, path) address for a substream. Path entries are
// labels such as a cell hash or a replicate index. Equal addresses give
// equal draw sequences; the key is a hash chain over the path, so distinct
// addresses give unrelated xoshiro states.
// ---------------------------------------------------------------------------
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0) : seed_(seed), key_(seed) {
        std::uint64_t s = seed;
        key_ = detail::splitmix64(s);
    }

    RngStream child(std::uint64_t label) const {
        RngStream out = *this;
        out.path_.push_back(label);
        out.key_ = detail::mix(key_, label);
        return out;
    }

    RngStream child(std::string_view label) const { return child(detail::hash_label(label)); }

    Engine engine() const { return Engine(key_); }

    std::uint64_t seed() const { return seed_; }
    const std::vector<std::uint64_t>& path() const { return path_; }
    std::uint64_t key() const { return key_; }

    friend bool operator==(const RngStream& a, const RngStream& b) {
        return a.seed_ == b.seed_ && a.path_ == b.path_;
    }

private:
    std::uint64_t seed_;
    std::uint64_t key_;
    std::vector<std::uint64_t> path_;
};

// ---- draws ----------------------------------------------------------------

inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound), Lemire's nearly-divisionless method.
inline std::uint64_t uniform_index(Engine& eng, std::uint64_t bound) {
    if (bound == 0) throw DomainError("uniform_index: empty range");
    std::uint64_t x = eng();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            x = eng();
            m = static_cast<__uint128_t>(x) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

inline std::int64_t binomial(Engine& eng, std::int64_t trials, double p) {
    if (trials < 0 || !(p >= 0.0 && p <= 1.0)) throw DomainError("binomial: invalid parameters");
    if (trials == 0 || p == 0.0) return 0;
    if (p == 1.0) return trials;
    std::binomial_distribution<std::int64_t> dist(trials, p);
    return dist(eng);
}

/// Successes in `draws` draws without replacement from an urn of
/// `population` balls, `successes` of them marked. Draws the urn one ball
/// at a time, so cost is O(min(draws, population - draws)).
inline std::int64_t hypergeometric(Engine& eng, std::int64_t population, std::int64_t successes,
                                   std::int64_t draws) {
    if (population < 0 || successes < 0 || successes > population || draws < 0 ||
        draws > population)
        throw DomainError("hypergeometric: invalid parameters");
    // Drawing the complement is cheaper when draws > population / 2.
    const bool complement = draws > population / 2;
    std::int64_t k = complement ? population - draws : draws;
    std::int64_t remaining = population;
    std::int64_t marked = successes;
    std::int64_t hits = 0;
    for (; k > 0; --k, --remaining) {
        if (uniform_index(eng, static_cast<std::uint64_t>(remaining)) <
            static_cast<std::uint64_t>(marked)) {
            ++hits;
            --marked;
        }
    }
    return complement ? successes - hits : hits;
}

/// Geometric number of failures before the first success, p in (0, 1].
inline std::int64_t geometric_skip(Engine& eng, double log1m_p) {
    // log1m_p = log(1 - p); caller handles p == 1.
    const double u = uniform01(eng);
    const double skip = std::floor(std::log1p(-u) / log1m_p);
    if (skip > 9.0e18) return std::numeric_limits<std::int64_t>::max();
    return static_cast<std::int64_t>(skip);
}

} // namespace nsumkit
