#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace epismc {

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::uint32_t k0,
                         std::uint32_t k1) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0,
           static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1,
           static_cast<std::uint32_t>(p0)};
}

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
inline std::array<std::uint32_t, 4> philox4x32(std::uint64_t key, std::uint64_t stream,
                                               std::uint64_t counter) {
    std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
        static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int r = 0; r < 10; ++r) {
        philox_round(ctr, k0, k1);
        k0 += kPhiloxW0;
        k1 += kPhiloxW1;
    }
    return ctr;
}

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Derives a stream id from a domain tag and up to two indices, so that
/// every (day, partition) or (step, particle) pair gets its own sequence.
inline std::uint64_t stream_id(std::uint64_t tag, std::uint64_t a = 0,
                               std::uint64_t b = 0) {
    return detail::mix64(detail::mix64(detail::mix64(tag) ^ a) ^ b);
}

/// Counter-based random stream. Cheap value type: any (seed, stream) pair
/// names an independent, reproducible sequence, so workers can draw without
/// shared state and results do not depend on thread scheduling.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream)
        : key_(seed), stream_(stream) {}

    std::uint64_t next_u64() {
        if (pos_ == 2) {
            const auto block = detail::philox4x32(key_, stream_, counter_++);
            buf_[0] = (static_cast<std::uint64_t>(block[1]) << 32) | block[0];
            buf_[1] = (static_cast<std::uint64_t>(block[3]) << 32) | block[2];
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    /// Uniform on [0, 1).
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1]; safe under log().
    double u01_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    /// Standard normal via Box-Muller; the paired draw is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double radius = std::sqrt(-2.0 * std::log(u01_pos()));
        const double angle = 2.0 * std::numbers::pi * u01();
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 2> buf_{};
    int pos_ = 2;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace epismc
