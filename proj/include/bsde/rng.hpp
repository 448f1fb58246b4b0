#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bsde {

// splitmix64 finalizer. Used to derive well-separated seed streams from a
// base seed: one stream per (path | repetition | purpose) without any
// shared generator state between consumers.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) noexcept {
    return mix64(base ^ mix64(salt));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t s1,
    std::uint64_t s2) noexcept {
    return derive_seed(derive_seed(base, s1), s2);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t s1, std::uint64_t s2,
    std::uint64_t s3) noexcept {
    return derive_seed(derive_seed(base, s1, s2), s3);
}

// Standard-normal stream: mt19937_64 uniforms through the Box-Muller
// transform. mt19937_64 output is pinned by the C++ standard, so a given
// seed reproduces the same stream bit-for-bit on any platform.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : eng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01(); // in (0, 1], keeps log() finite
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace bsde
