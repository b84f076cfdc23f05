#pragma once

#include <cmath>
#include <cstdint>

namespace jklab {

// Counter-based random stream. Every draw is a pure function of
// (seed, stream id, counter), so independent streams can run on any
// thread schedule and still reproduce bit-identically.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream)
        : key_(derive_key(seed, stream)), seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() {
        return mix(key_ ^ mix(++counter_ * 0x9e3779b97f4a7c15ULL));
    }

    // uniform on [0,1)
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform on (0,1], safe as a log() argument
    double next_unit_open() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double next_exponential(double rate) {
        return -std::log(next_unit_open()) / rate;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
        return mix(mix(seed + 0x9e3779b97f4a7c15ULL) ^ mix(stream * 0xbf58476d1ce4e5b9ULL + 1));
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::uint64_t seed_;
    std::uint64_t stream_;
};

} // namespace jklab
