#pragma once
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gaitnirs {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Deterministic RNG: mt19937_64 has a standard-specified output sequence, and all
// distribution transforms are implemented here so results are identical across
// platforms and standard libraries.
class RandomStream {
  public:
    explicit RandomStream(uint64_t seed) : eng_(seed), seed_(seed) {}

    uint64_t seed() const { return seed_; }
    uint64_t raw() { return eng_(); }

    // [0, 1)
    double uniform() { return std::ldexp(static_cast<double>(eng_() >> 11), -53); }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Polar Box-Muller; the spare value is discarded so the draw count per call is
    // data-independent only in distribution, but the stream stays reproducible.
    double normal(double mean = 0.0, double sd = 1.0) {
        for (;;) {
            double u = 2.0 * uniform() - 1.0;
            double v = 2.0 * uniform() - 1.0;
            double s = u * u + v * v;
            if (s > 0.0 && s < 1.0)
                return mean + sd * u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

    double lognormal(double sigma) { return std::exp(normal(0.0, sigma)); }

    bool bernoulli(double p) { return uniform() < p; }

    // Unbiased integer in [0, n)
    uint64_t uniform_int(uint64_t n) {
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        for (;;) {
            uint64_t r = eng_();
            if (r < limit) return r % n;
        }
    }

    // Knuth's method; fine for the small rates used here.
    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        double limit = std::exp(-lambda);
        double p = 1.0;
        int k = 0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_int(i)]);
    }

    // Child streams derive from the original seed, not engine state, so they are
    // independent of how much the parent has been consumed.
    RandomStream child(uint64_t index) const {
        return RandomStream(splitmix64(seed_ + index * 0x9E3779B97F4A7C15ull));
    }

  private:
    std::mt19937_64 eng_;
    uint64_t seed_;
};

} // namespace gaitnirs
