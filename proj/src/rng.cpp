#include "blockbuild/rng.hpp"

#include <cassert>
#include <cmath>

namespace blockbuild {

int RandomSource::below(int n) {
    assert(n > 0);
    int v = static_cast<int>(uniform() * static_cast<double>(n));
    return v >= n ? n - 1 : v;
}

std::uint64_t SplitMix::next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double SplitMix::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double gaussian(RandomSource& rng) {
    const double u1 = 1.0 - rng.uniform(); // (0, 1], keeps log finite
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586 * u2);
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt_a, std::uint64_t salt_b) {
    SplitMix s(base ^ (salt_a * 0xD6E8FEB86659FD93ULL) ^ (salt_b * 0xCA5A826395121157ULL));
    return s.next_u64();
}

} // namespace blockbuild
