#include "gbmd/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gbmd {

namespace {

// Stafford mix13 finalizer, the avalanche used by splitmix64.
std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdULL;
    z ^= z >> 33;
    z *= 0xc4ceb9fe1a85ec53ULL;
    z ^= z >> 33;
    return z;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

} // namespace

RandomSource::RandomSource(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(seed ^ mix64(stream + kGolden))) {}

std::uint64_t RandomSource::bits() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double RandomSource::uniform() {
    return static_cast<double>((bits() >> 11) + 1) * 0x1.0p-53;
}

double RandomSource::gaussian() {
    if (has_cache_) {
        has_cache_ = false;
        return cache_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cache_ = r * std::sin(theta);
    has_cache_ = true;
    return r * std::cos(theta);
}

std::uint64_t RandomSource::below(std::uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("RandomSource::below: n must be positive");
    }
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits()) * n) >> 64);
}

RandomSource RandomSource::fork(std::uint64_t substream) const {
    return RandomSource(seed_, mix64(stream_ + kGolden * (substream + 1)));
}

RandomSource RandomSource::restore(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                                   bool has_cache, double cache) {
    RandomSource r(seed, stream);
    r.counter_ = counter;
    r.has_cache_ = has_cache;
    r.cache_ = cache;
    return r;
}

} // namespace gbmd
