#pragma once

// Seeded, cross-platform-reproducible random numbers. PCG32 (XSH-RR output
// permutation over a 64-bit LCG) for uniforms, Box-Muller for gaussians.
// Every stochastic stage in the pipeline draws from one of these streams so
// that a run is fully determined by its seeds.

#include <cmath>
#include <cstdint>

namespace keep {

/// splitmix64 finalizer. Used to derive child stream seeds:
/// child_seed = splitmix64(parent_seed ^ stream_id).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class SeededRng {
public:
    static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
    static constexpr std::uint64_t kDefaultStream = 1442695040888963407ULL; // already odd

    explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0) {
        increment_ = (stream << 1u) | 1u;
        if (stream == 0) increment_ = kDefaultStream;
        state_ = 0;
        next_u32();
        state_ += seed;
        next_u32();
    }

    /// Child generator for parallel work: seed = splitmix64(parent_seed ^ id).
    static SeededRng child(std::uint64_t parent_seed, std::uint64_t stream_id) {
        return SeededRng(splitmix64(parent_seed ^ stream_id));
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * kMultiplier + increment_;
        auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    /// Uniform draw in [0,1): 32-bit output / 2^32.
    double uniform() {
        return static_cast<double>(next_u32()) * 0x1.0p-32;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    /// Standard normal via Box-Muller. Consumes exactly two uniforms per pair;
    /// the first is shifted to (0,1] so the log is finite. The cosine branch is
    /// returned first, the sine branch cached for the next call.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform(); // (0,1]
        double u2 = uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * kPi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    std::uint64_t state() const { return state_; }
    std::uint64_t increment() const { return increment_; }

private:
    static constexpr double kPi = 3.14159265358979323846;

    std::uint64_t state_ = 0;
    std::uint64_t increment_ = kDefaultStream;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace keep
