#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace eponq {

/// SplitMix64 used as a counter-based generator: the n-th output is a pure
/// function of (key, n), so substreams are addressed by key instead of by
/// skipping ahead. Keys for (seed, replication, onu, purpose) come from
/// `derive`.
class CounterRng {
public:
    using result_type = std::uint64_t;

    static constexpr std::string_view algorithm = "splitmix64-counter";

    explicit CounterRng(std::uint64_t key = 0) noexcept : key_(key) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t replication,
                                          std::uint64_t stream, std::uint64_t purpose) noexcept {
        std::uint64_t k = mix(seed + 0x9e3779b97f4a7c15ULL);
        k = mix(k ^ (replication + 0x632be59bd9b4e019ULL));
        k = mix(k ^ (stream + 0x8cb92ba72f3d8dd7ULL));
        return mix(k ^ (purpose + 0xd1b54a32d192ed03ULL));
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept {
        ++counter_;
        return mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double exponential(double mean) noexcept { return -mean * std::log1p(-uniform()); }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace eponq
