#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <vector>

namespace deepbnd {

// Counter-based generator built on the splitmix64 mixer. All artifacts are
// keyed on (seed, stream) so any draw can be reproduced bit-exactly on any
// platform; no libstdc++ distribution objects are involved anywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(mix(seed ^ 0x6a09e667f3bcc908ull) ^ mix(stream * 0x9e3779b97f4a7c15ull)) {}

    std::uint64_t next_u64() { return mix(state_ += 0x9e3779b97f4a7c15ull); }

    // uniform in [0,1): 53 mantissa bits
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Box-Muller; avoids log(0) by the uniform() range
    double normal() {
        double u1 = uniform(), u2 = uniform();
        while (u1 == 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

} // namespace deepbnd
