#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace tailadrf {

// SplitMix64 finalizer, used to derive independent sub-streams from a master
// seed without coupling draw order across pipeline stages.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream ^ 0x6A09E667F3BCC909ULL));
}

// Seeded draws on top of mt19937_64. All distribution transforms are done by
// hand so output is reproducible across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() {  // [0, 1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }
    double uniform_pos() {  // (0, 1]
        return 1.0 - uniform();
    }
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }
    double exponential(double scale = 1.0) {
        return -scale * std::log(uniform_pos());
    }
    double pareto(double alpha, double xm = 1.0) {
        return xm * std::pow(uniform_pos(), -1.0 / alpha);
    }
    double student_t2() {
        // t with 2 dof: Z / sqrt(chi2_2 / 2), and chi2_2 / 2 ~ Exp(1)
        return normal() / std::sqrt(exponential(1.0));
    }
    double gpd(double xi, double sigma) {
        const double u = uniform_pos();
        if (std::abs(xi) < 1e-12) return -sigma * std::log(u);
        return sigma * (std::pow(u, -xi) - 1.0) / xi;
    }
    bool bernoulli(double p) { return uniform() < p; }
    double random_sign() { return uniform() < 0.5 ? -1.0 : 1.0; }
    std::size_t below(std::size_t n) { return eng_() % n; }

private:
    std::mt19937_64 eng_;
};

}  // namespace tailadrf
