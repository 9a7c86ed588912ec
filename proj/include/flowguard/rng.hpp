// rng.hpp - seeded random streams with a fixed splitting rule
//
// Every random draw in the pipeline flows from one root seed. Subsystems
// derive independent streams as derive_stream(root, tag, a, b) where `tag`
// names the subsystem ("synth", "split", "ssl.init", "ssl.epoch",
// "qga.measure", ...) and a/b are loop indices (generation, candidate,
// epoch, row, ...). Two streams with different (tag, a, b) never overlap,
// so each subsystem is reproducible on its own.
#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <string_view>
#include <vector>

namespace flowguard {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1) with 53 random bits
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // unbiased index in [0, n); multiply-shift rejection is overkill here
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(eng_()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // standard normal via Box-Muller; fully specified, no libstdc++
    // distribution objects so streams stay byte-stable across rebuilds
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline RngStream derive_stream(std::uint64_t root, std::string_view tag,
                               std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = splitmix64(root ^ fnv1a64(tag));
    s = splitmix64(s ^ (a + 0x9e3779b97f4a7c15ULL));
    s = splitmix64(s ^ (b + 0x7f4a7c159e3779b9ULL));
    return RngStream(s);
}

// Fisher-Yates; spelled out so shuffles are identical on every platform
template <typename T>
void shuffle(std::vector<T>& v, RngStream& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = rng.uniform_index(i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace flowguard
