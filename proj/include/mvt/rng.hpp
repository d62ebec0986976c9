#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <random>

namespace mvt {

// Seeded PRNG with a fixed mapping to doubles and integer ranges.
// std::mt19937_64 is pinned by the standard, and the value mappings below
// avoid std::*_distribution, whose output is implementation-defined.
// State round-trips through text streams for bitwise-resumable training.
class Rng {
public:
    Rng() : engine_(0x9e3779b97f4a7c15ull) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

    friend std::ostream& operator<<(std::ostream& os, const Rng& r) { return os << r.engine_; }
    friend std::istream& operator>>(std::istream& is, Rng& r) { return is >> r.engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace mvt
