#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

// Deterministic, splittable random streams built on the SplitMix64 generator.
// All sampling routines are hand-rolled integer/float arithmetic so that a
// given (seed, stream index) pair produces bit-identical draws on every
// platform; the standard-library distributions are implementation defined and
// would break the reproducibility contract of the simulation harness.

namespace gmlemix {

class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    static RngStream root(std::uint64_t seed) { return RngStream(mix(seed)); }

    // Derive an independent child stream; children are indexed, so permuting
    // the order in which they are consumed does not change their draws.
    RngStream child(std::uint64_t index) const {
        return RngStream(mix(state_ ^ (0xA24BAED4963EE407ULL * (index + 1))));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    int binomial(int n, double p) {
        if (n < 0) throw std::domain_error("binomial: negative trial count");
        int successes = 0;
        for (int i = 0; i < n; ++i) successes += bernoulli(p) ? 1 : 0;
        return successes;
    }

    // Knuth's multiplicative method, chunked so exp(-lambda) never underflows.
    int poisson(double lambda) {
        if (lambda < 0.0) throw std::domain_error("poisson: negative rate");
        int total = 0;
        while (lambda > 30.0) {
            total += poisson_small(30.0);
            lambda -= 30.0;
        }
        return total + poisson_small(lambda);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    int poisson_small(double lambda) {
        if (lambda <= 0.0) return 0;
        const double threshold = std::exp(-lambda);
        int k = 0;
        double prod = uniform01();
        while (prod > threshold) {
            ++k;
            prod *= uniform01();
        }
        return k;
    }

    std::uint64_t state_;
};

}  // namespace gmlemix
