#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gst/error.hpp"

namespace gst {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives the seed of an independent sub-stream. Every stochastic stage of a
// run (init, dataset generation, each MC pass, each round) gets its own salt
// so that reordering or parallelizing one stage cannot perturb another.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    return splitmix64(base ^ splitmix64(salt));
}

// mt19937_64 with hand-rolled value conversions. std::*_distribution output
// is implementation-defined, so uniform/normal/bernoulli are produced from
// raw 64-bit draws to keep sequences identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t u64() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n). Multiply-shift map; the O(2^-64) bias is
    // irrelevant at the scales used here.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw Error("rng: below(0)");
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(u64()) * n) >> 64);
    }

    Rng child(std::uint64_t salt) const { return Rng(derive_seed(seed_, salt)); }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Fisher-Yates shuffle driven by Rng (std::shuffle's draw pattern is
// implementation-defined).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace gst
