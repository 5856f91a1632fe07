#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace sadepth {

/// Deterministic RNG. All sampling goes through explicit formulas on top of
/// mt19937_64 so streams are reproducible across platforms and library
/// versions. State round-trips through a string for checkpointing.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(uint64_t seed) : gen_(seed), seed_base_(seed) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    int64_t uniform_index(int64_t n) { return static_cast<int64_t>(gen_() % static_cast<uint64_t>(n)); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller, one cached spare.
    double normal();

    /// Derived stream for (e.g.) a sample index; independent of draw order on
    /// the parent stream.
    Rng fork(uint64_t stream) const;

    std::string serialize() const;
    static Rng deserialize(const std::string& s);

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
    uint64_t seed_base_ = 0; // retained for fork()

    friend struct RngAccess;
};

} // namespace sadepth
