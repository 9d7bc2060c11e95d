#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace collapsim {

// splitmix64, used to derive independent stream seeds from (master, counter).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seeded random stream (xoshiro256++, state expanded from the seed with
/// splitmix64). Streams for trajectory k are derived from the master seed
/// by hashing the counter, so adding trials never perturbs the samples of
/// earlier trials, and distinct streams are statistically independent
/// from their very first draws.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
    }

    static RngStream substream(std::uint64_t master_seed, std::uint64_t counter) {
        return RngStream(splitmix64(splitmix64(master_seed) ^ splitmix64(counter + 1)));
    }

    std::uint64_t operator()() {
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

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // exponential with the given mean (inverse CDF; avoids log(0))
    double exponential(double mean) {
        return -mean * std::log1p(-uniform());
    }

    std::uint64_t uniform_index(std::uint64_t n) {
        // rejection-free modulo bias is irrelevant at n << 2^64, but stay exact
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = (*this)();
        } while (v >= limit);
        return v % n;
    }

    /// Draw an index from unnormalized nonnegative weights via inverse CDF.
    std::size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t state_[4];
};

}  // namespace collapsim
