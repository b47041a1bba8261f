#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace lon {

namespace detail {

// SplitMix64 finalizer; used to expand seeds into well-mixed stream states.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based random stream: xoshiro256++ seeded from (seed, stream index)
/// through SplitMix64.  Two streams with different indices are independent,
/// and a stream's output depends only on (seed, index), never on the order in
/// which streams are created.  All samplers are hand-rolled so that streams
/// are bit-reproducible across platforms and standard-library versions.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_index = 0) {
        std::uint64_t state = seed ^ (0x6a09e667f3bcc909ull + stream_index * 0x9e3779b97f4a7c15ull);
        for (auto& word : state_) word = detail::splitmix64(state);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe to pass to log().
    double uniform_positive() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_positive()));
        const double phi = 2.0 * pi() * uniform();
        cached_ = r * std::sin(phi);
        have_cached_ = true;
        return r * std::cos(phi);
    }

    /// Circular complex Gaussian with E|z|^2 = 1.
    std::complex<double> complex_normal() {
        const double r = std::sqrt(-std::log(uniform_positive()));
        const double phi = 2.0 * pi() * uniform();
        return {r * std::cos(phi), r * std::sin(phi)};
    }

    /// Poisson sample by CDF inversion; intended for small means.
    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double u = uniform();
        double p = std::exp(-mean);
        double cdf = p;
        int k = 0;
        while (u > cdf && k < 1000) {
            ++k;
            p *= mean / k;
            cdf += p;
        }
        return k;
    }

    /// Geometric counting law P(n) = (1-q) q^n by CDF inversion, q in [0,1).
    int geometric(double q) {
        if (q <= 0.0) return 0;
        const double u = uniform_positive();
        return static_cast<int>(std::floor(std::log(u) / std::log(q)));
    }

    /// Uniform angle in [0, 2*pi).
    double angle() { return 2.0 * pi() * uniform(); }

private:
    static constexpr double pi() { return 3.141592653589793238462643383279502884; }
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace lon
