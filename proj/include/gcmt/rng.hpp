#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace gcmt {

// Seeded RNG with self-contained distributions. std::*_distribution is
// implementation-defined, so uniform/gaussian draws are produced here to keep
// runs reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t below(std::uint64_t n);

    // Standard normal via Box-Muller (no cached second value).
    double gaussian();

    // First k entries of a seeded permutation of 0..n-1.
    std::vector<int> sample_without_replacement(int n, int k);

    void shuffle(std::vector<int>& v);

    // Stable sub-seed for a named stream.
    static std::uint64_t derive(std::uint64_t master, std::string_view tag);

private:
    std::mt19937_64 gen_;
};

}  // namespace gcmt
