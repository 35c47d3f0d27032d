#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "copmix/common.hpp"
#include "copmix/special.hpp"

namespace copmix {

// Seeded stream of doubles. All distributions are built from the raw
// mt19937_64 output with fixed algorithms, so a (seed, stream) pair pins the
// whole draw sequence; one stream per tempering chain plus one for the
// orchestrator, derived from the master seed by fixed offsets.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::seed_seq seq{seed & 0xffffffffu, seed >> 32, stream + 0x9e3779b9u};
        gen_.seed(seq);
    }

    std::uint64_t raw() { return gen_(); }

    // uniform on the open interval (0,1)
    double uniform() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() { return norm_quantile(uniform()); }

    double exponential() { return -std::log(uniform()); }

    double gumbel() { return -std::log(-std::log(uniform())); }

    // Marsaglia-Tsang; shape < 1 boosted through the power trick
    double gamma(double shape, double rate = 1.0) {
        require(shape > 0.0 && rate > 0.0, "domain", "gamma requires positive parameters");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }

    double chi_squared(double df) { return gamma(0.5 * df, 0.5); }

    double beta(double a, double b) {
        require(a > 0.0 && b > 0.0, "domain", "beta requires positive parameters");
        const double x = gamma(a);
        const double y = gamma(b);
        double v = x / (x + y);
        if (v < 1e-12) v = 1e-12;
        if (v > 1.0 - 1e-12) v = 1.0 - 1e-12;
        return v;
    }

    // index into unnormalized nonnegative weights
    int categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) {
            require(w >= 0.0, "domain", "categorical weights must be nonnegative");
            total += w;
        }
        require(total > 0.0, "domain", "categorical requires a positive weight");
        double t = uniform() * total;
        for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
            t -= weights[k];
            if (t <= 0.0) return static_cast<int>(k);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        const auto span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<int>(gen_() % span);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace copmix
