// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <boost/random/normal_distribution.hpp>

#include <cstdint>
#include <limits>
#include <random>

namespace gsd {

/// SplitMix64 as a UniformRandomBitGenerator. Cheap to seed, which makes it
/// suitable for one short stream per point of a noise field.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
    SplitMix64 g(a ^ (b * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL));
    g();
    return g();
}

/// Independent standard-normal stream identified by (key, domain, index).
/// Two calls with the same triple produce the same sequence.
class KeyedNormalStream {
public:
    KeyedNormalStream(std::uint64_t key, std::uint64_t domain, std::uint64_t index)
        : engine_(mix_key(mix_key(key, domain), index)) {}

    double operator()() { return normal_(engine_); }

private:
    SplitMix64 engine_;
    boost::random::normal_distribution<double> normal_{0.0, 1.0};  // ziggurat
};

/// Explicit, caller-owned random state. Never global.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t next_key() { return engine_(); }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace gsd
