#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace meltpool {

// Deterministic RNG used for parameter init, splits and batch shuffling.
// Gaussian draws use an explicit Box-Muller transform rather than
// std::normal_distribution so the stream is identical across standard
// libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform in [0, 1).
    double uniform() {
        return (gen_() >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa
    }

    double normal(double mean = 0.0, double stdev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stdev * spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return mean + stdev * r * std::cos(a);
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return gen_() % n; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace meltpool
