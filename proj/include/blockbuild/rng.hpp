#pragma once

#include <cstdint>

namespace blockbuild {

// Uniform source behind a virtual so tests can stub branch decisions.
class RandomSource {
public:
    virtual ~RandomSource() = default;

    /// Next draw in [0, 1).
    virtual double uniform() = 0;

    /// Integer in {0, ..., n-1}; n must be positive.
    int below(int n);
};

// splitmix64 core. Chosen over std engines so that streams are
// bit-stable across standard library implementations.
class SplitMix final : public RandomSource {
public:
    explicit SplitMix(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    double uniform() override;

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

/// Standard normal draw via Box-Muller. Stateless: always consumes two
/// uniforms, so the stream position is a pure function of the call count.
double gaussian(RandomSource& rng);

/// Derives an independent stream seed from a base seed and salts.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt_a, std::uint64_t salt_b = 0);

} // namespace blockbuild
