#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "gpr/geo.hpp"

namespace gpr {

/// Deterministic RNG used everywhere randomness is needed. mt19937_64 output
/// is fixed by the standard; the derived draws below are implemented by hand
/// so sequences do not depend on the stdlib's distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n); n must be > 0.
    uint64_t uniform_index(uint64_t n) {
        // modulo bias is negligible for the n used here (<< 2^64)
        return engine_() % n;
    }

    /// Standard normal via Box-Muller.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * PI * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    /// Uniformly random bearing in degrees.
    double bearing_deg() { return uniform(0.0, 360.0); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace gpr
