#include "qpde/random.hpp"

namespace qpde {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Stream Stream::split(std::uint64_t index) const {
    return Stream(splitmix64(seed_ ^ splitmix64(index + 1)));
}

double Stream::uniform_open() {
    // 53 random mantissa bits, shifted by half an ulp so 0 is never produced.
    for (;;) {
        const double u = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
        if (u > 0.0 && u < 1.0) return u;
    }
}

double Stream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform_open(); }

double Stream::normal() { return normal_(engine_); }

}  // namespace qpde
