#pragma once
// Counter-based pseudorandomness. Every variate is a pure function of
// (seed, stream tag, absolute counter), so a synthesized observation is
// bit-identical no matter how it is chunked into segments or spread across
// threads. The generator is SplitMix64 used in counter mode: the value at
// counter i is mix64(key + (i+1)*GOLDEN).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace mtd {

namespace rng_detail {
constexpr std::uint64_t GOLDEN = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}
}  // namespace rng_detail

// Stream tags: fixed small integers keeping the counter spaces of unrelated
// draws (noise, placements, class labels, solver starts, ...) disjoint.
enum class rng_stream : std::uint64_t {
    noise = 1,
    placement = 2,
    labels = 3,
    counts = 4,
    starts = 5,
    signals = 6,
    retrieval = 7,
};

class counter_rng {
  public:
    counter_rng(std::uint64_t seed, rng_stream stream)
        : key_(rng_detail::mix64(rng_detail::mix64(seed + 0x632BE59BD9B4E019ull) ^
                                 (static_cast<std::uint64_t>(stream) * rng_detail::GOLDEN))) {}

    std::uint64_t bits(std::uint64_t ctr) const {
        return rng_detail::mix64(key_ + (ctr + 1) * rng_detail::GOLDEN);
    }
    // Uniform on [0,1), 53-bit resolution.
    double uniform(std::uint64_t ctr) const {
        return static_cast<double>(bits(ctr) >> 11) * 0x1.0p-53;
    }
    // Uniform on (0,1]; safe as a log() argument.
    double uniform_pos(std::uint64_t ctr) const {
        return static_cast<double>((bits(ctr) >> 11) + 1) * 0x1.0p-53;
    }
    // Standard normal via Box-Muller (cosine branch only, so one variate
    // consumes exactly the counters 2*ctr and 2*ctr+1).
    double gaussian(std::uint64_t ctr) const {
        double u1 = uniform_pos(2 * ctr);
        double u2 = uniform(2 * ctr + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    // Uniform integer in [0, bound) by 128-bit multiply. The 2^-64-scale bias
    // is far below anything observable here and keeps the draw one-counter.
    std::uint64_t uniform_int(std::uint64_t bound, std::uint64_t ctr) const {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(bits(ctr)) * bound) >> 64);
    }
    // Poisson count by CDF inversion; consumes exactly one counter, so every
    // position's count is a pure function of its own index. Accurate for the
    // modest rates used here (lambda <= ~30).
    int poisson(double lambda, std::uint64_t ctr) const {
        if (!(lambda >= 0.0) || lambda > 30.0)
            throw std::invalid_argument("poisson: rate must be in [0, 30]");
        double u = uniform(ctr);
        double p = std::exp(-lambda);
        double cum = p;
        int k = 0;
        while (u >= cum && k < 512) {
            ++k;
            p *= lambda / k;
            cum += p;
        }
        return k;
    }
    // Categorical draw from unnormalized nonnegative weights.
    int categorical(const double* w, int n, std::uint64_t ctr) const {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += w[i];
        double u = uniform(ctr) * total;
        double acc = 0.0;
        for (int i = 0; i < n - 1; ++i) {
            acc += w[i];
            if (u < acc) return i;
        }
        return n - 1;
    }

  private:
    std::uint64_t key_;
};

}  // namespace mtd
