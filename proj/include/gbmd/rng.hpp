#pragma once

#include <cstdint>

namespace gbmd {

// Counter-based deterministic random source. Each draw is a pure function of
// (seed, stream, counter), so sequences are reproducible across runs and
// platforms and independent streams can be carved off cheaply with fork().
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t bits();
    // Uniform in (0, 1]; never returns 0 so it is safe under log().
    double uniform();
    // Standard normal via Box-Muller; draws come in pairs, second is cached.
    double gaussian();
    // Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n);

    // Independent stream derived from this source's identity.
    RandomSource fork(std::uint64_t substream) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }
    bool has_cached_gaussian() const { return has_cache_; }
    double cached_gaussian() const { return cache_; }

    // Rebuild a source mid-sequence (checkpoint restore).
    static RandomSource restore(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                                bool has_cache, double cache);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_cache_ = false;
    double cache_ = 0.0;
};

} // namespace gbmd
