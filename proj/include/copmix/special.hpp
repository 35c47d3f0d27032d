#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "copmix/common.hpp"

namespace copmix {

inline constexpr double inv_sqrt2 = 0.70710678118654752440;
inline constexpr double log_2pi = 1.8378770664093454836;

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * inv_sqrt2); }

// upper tail 1 - Phi(x), accurate for large x
inline double norm_sf(double x) { return 0.5 * std::erfc(x * inv_sqrt2); }

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double log_norm_pdf(double x) { return -0.5 * (log_2pi + x * x); }

// Wichura's AS 241 (PPND16): double-precision normal quantile.
inline double norm_quantile(double p) {
    require(p > 0.0 && p < 1.0, "domain", "norm_quantile requires p in (0,1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) *
                        r +
                    4.5921953931549871457e+4) *
                       r +
                   1.3731693765509461125e+4) *
                      r +
                  1.9715909503065514427e+3) *
                     r +
                 1.3314166789178437745e+2) *
                    r +
                3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) *
                        r +
                    2.1213794301586595867e+4) *
                       r +
                   5.3941960214247511077e+3) *
                      r +
                  6.8718700749205790830e+2) *
                     r +
                 4.2313330701600911252e+1) *
                    r +
                1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) *
                       r +
                   1.27045825245236838258e+0) *
                      r +
                  3.64784832476320460504e+0) *
                     r +
                 5.76949722146069140550e+0) *
                    r +
                4.63033784615654529590e+0) *
                   r +
               1.42343711074968357734e+0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) *
                       r +
                   1.48103976427480074590e-1) *
                      r +
                  6.89767334985100004550e-1) *
                     r +
                 1.67638483018380384940e+0) *
                    r +
                2.05319162663775882187e+0) *
                   r +
               1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) *
                       r +
                   2.65321895265761230930e-2) *
                      r +
                  2.96560571828504891230e-1) *
                     r +
                 1.78482653991729133580e+0) *
                    r +
                5.46378491116411436990e+0) *
                   r +
               6.65790464350110377720e+0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) *
                       r +
                   7.86869131145613259100e-4) *
                      r +
                  1.48753612908506148525e-2) *
                     r +
                 1.36929880922735805310e-1) *
                    r +
                5.99832206555887937690e-1) *
                   r +
               1.0);
    }
    return (q < 0.0) ? -val : val;
}

namespace detail {

// continued fraction for the regularized incomplete beta (Lentz)
inline double beta_cf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace detail

// regularized incomplete beta I_x(a, b)
inline double inc_beta(double a, double b, double x) {
    require(a > 0.0 && b > 0.0, "domain", "inc_beta requires positive shape parameters");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(lbt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::beta_cf(a, b, x) / a;
    return 1.0 - bt * detail::beta_cf(b, a, 1.0 - x) / b;
}

inline double student_t_cdf(double x, double nu) {
    require(nu > 0.0, "domain", "student_t_cdf requires nu > 0");
    if (x == 0.0) return 0.5;
    const double tail = 0.5 * inc_beta(0.5 * nu, 0.5, nu / (nu + x * x));
    return x > 0.0 ? 1.0 - tail : tail;
}

inline double log_student_t_pdf(double x, double nu) {
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
           0.5 * std::log(nu * std::numbers::pi) -
           0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

// closed-form quantile of the t distribution with 2 degrees of freedom
inline double t2_quantile(double u) {
    require(u > 0.0 && u < 1.0, "domain", "t2_quantile requires u in (0,1)");
    const double c = 2.0 * u - 1.0;
    return c * std::sqrt(2.0 / (1.0 - c * c));
}

inline int poisson_quantile(double lambda, double u) {
    require(lambda > 0.0 && u > 0.0 && u < 1.0, "domain", "poisson_quantile domain");
    double pmf = std::exp(-lambda);
    double cdf = pmf;
    int k = 0;
    while (cdf < u && k < 100000) {
        ++k;
        pmf *= lambda / k;
        cdf += pmf;
    }
    return k;
}

inline double log_multigamma(double a, int d) {
    double s = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
    for (int j = 0; j < d; ++j) s += std::lgamma(a - 0.5 * j);
    return s;
}

inline double log_beta_pdf(double x, double a, double b) {
    require(x > 0.0 && x < 1.0, "domain", "log_beta_pdf requires x in (0,1)");
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) +
           std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
}

inline double log_gamma_pdf(double x, double shape, double rate) {
    require(x > 0.0, "domain", "log_gamma_pdf requires x > 0");
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) -
           rate * x;
}

inline double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace copmix
