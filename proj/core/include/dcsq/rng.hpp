#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "dcsq/errors.hpp"

// Seeded randomness helpers. Everything here is deterministic for a given
// seed on any platform: mt19937_64 output is pinned by the standard, and the
// variate transforms below are explicit (std::normal_distribution is
// implementation-defined and must not be used anywhere in this project).

namespace dcsq {

/// SplitMix64 mixing step, used to derive independent per-record /
/// per-batch seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for logical stream `stream` of work unit `index` under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                 std::uint64_t stream = 0) {
    return splitmix64(splitmix64(master ^ (0x9e3779b97f4a7c15ULL * (index + 1))) ^ stream);
}

/// Standard-normal sampler (Marsaglia polar method, explicit caching).
class normal_sampler {
public:
    explicit normal_sampler(std::uint64_t seed) : eng_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Exact Poisson variate via Knuth's product method. Intended for the
/// small-photon-number sampling mode; cost is O(lambda).
inline std::uint64_t poisson_knuth(normal_sampler& rng, double lambda) {
    if (lambda < 0.0)
        throw numerical_error("poisson_knuth: negative rate");
    if (lambda > 4096.0)
        throw config_error("poisson sampling mode is restricted to small photon numbers "
                           "(lambda <= 4096); use gaussian sampling instead");
    // Split large rates so exp(-lambda) stays representable.
    std::uint64_t n = 0;
    double remaining = lambda;
    while (remaining > 500.0) {
        double p = 1.0;
        const double bound = std::exp(-500.0);
        do {
            ++n;
            p *= rng.uniform();
        } while (p > bound);
        --n;
        remaining -= 500.0;
    }
    double p = 1.0;
    const double bound = std::exp(-remaining);
    do {
        ++n;
        p *= rng.uniform();
    } while (p > bound);
    return n - 1;
}

} // namespace dcsq
