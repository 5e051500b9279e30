#pragma once

#include <cstdint>
#include <random>

namespace qpde {

/// SplitMix64 finalizer; used to derive independent seeds.
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x);

/// Seeded single-owner random stream.
///
/// Sub-streams are derived with a counter-based split: stream `k` of a parent
/// seeded with `s` is seeded with splitmix64(s ^ splitmix64(k + 1)). The split
/// depends only on (s, k), never on how many draws the parent has made, so
/// parallel consumers can each own a sub-stream and stay reproducible.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] Stream split(std::uint64_t index) const;

    /// Uniform on the open interval (0, 1).
    double uniform_open();
    double uniform(double lo, double hi);
    double normal();

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace qpde
