#pragma once

#include <cmath>
#include <vector>

#include "copmix/kernel.hpp"

namespace copmix {

enum class SimDesign { sim1_gaussian, sim1_t, sim2_mixed, toy_two_modes };

inline SimDesign parse_design(const std::string& name) {
    if (name == "sim1" || name == "sim1_gaussian") return SimDesign::sim1_gaussian;
    if (name == "sim1_t") return SimDesign::sim1_t;
    if (name == "sim2" || name == "sim2_mixed") return SimDesign::sim2_mixed;
    if (name == "toy" || name == "toy_two_modes") return SimDesign::toy_two_modes;
    throw error("config_invalid", "unknown simulation design '" + name + "'");
}

// Simulation 1: bivariate copula-scale draws from the two-component mixture
// 0.75 C(.|rho=-0.6) + 0.25 C(.|rho=0.8); the t variant adds df 2 and 4.
inline Matrix gen_sim1(bool t_kernel, int n, Rng& rng) {
    require(n >= 1, "domain", "gen_sim1 needs n >= 1");
    const double rhos[2] = {-0.6, 0.8};
    const double dfs[2] = {2.0, 4.0};
    Matrix u(n, 2);
    for (int i = 0; i < n; ++i) {
        const int k = (rng.uniform() < 0.75) ? 0 : 1;
        const double rho = rhos[k];
        double z1 = rng.normal();
        double z2 = rho * z1 + std::sqrt(1.0 - rho * rho) * rng.normal();
        if (t_kernel) {
            const double scale = std::sqrt(dfs[k] / rng.chi_squared(dfs[k]));
            z1 *= scale;
            z2 *= scale;
            u(i, 0) = student_t_cdf(z1, dfs[k]);
            u(i, 1) = student_t_cdf(z2, dfs[k]);
        } else {
            u(i, 0) = norm_cdf(z1);
            u(i, 1) = norm_cdf(z2);
        }
    }
    return u;
}

inline Schema sim1_schema() {
    Schema s;
    s.columns = {{"u1", ColumnKind::continuous, 0}, {"u2", ColumnKind::continuous, 0}};
    return s;
}

inline Dataset dataset_from_matrix(const Schema& schema, const Matrix& cells) {
    Dataset d;
    d.schema = schema;
    d.cells = cells;
    d.mask.setConstant(cells.rows(), cells.cols(), false);
    return d;
}

// Simulation 2 constants (two-component mixture on the 6-dim latent scale).
inline const Matrix& sim2_sigma1() {
    static const Matrix m = [] {
        Matrix s(6, 6);
        s << 1, -0.286, -0.409, -0.038, -0.410, -0.305,
            -0.286, 1, 0.085, 0.193, 0.665, -0.588,
            -0.409, 0.085, 1, -0.378, -0.006, 0.034,
            -0.038, 0.193, -0.378, 1, 0.675, 0.311,
            -0.410, 0.665, -0.006, 0.675, 1, 0.151,
            -0.305, -0.588, 0.034, 0.311, 0.151, 1;
        strict_llt(s, "sim2 Sigma1 is not positive definite");
        return s;
    }();
    return m;
}

inline const Matrix& sim2_sigma2() {
    static const Matrix m = [] {
        Matrix s(6, 6);
        s << 1, -0.404, 0.285, 0.074, -0.058, 0.075,
            -0.404, 1, 0.085, -0.147, 0.306, 0.832,
            0.285, 0.085, 1, -0.501, 0.733, -0.029,
            0.074, -0.147, -0.501, 1, -0.037, -0.072,
            -0.058, 0.306, 0.733, -0.037, 1, 0.061,
            0.075, 0.832, -0.029, -0.072, 0.061, 1;
        strict_llt(s, "sim2 Sigma2 is not positive definite");
        return s;
    }();
    return m;
}

inline Vector sim2_beta(int component) {
    Vector b(3);
    if (component == 0)
        b << 0.5, 1.0, -0.5;
    else
        b << -1.0, -0.5, 1.0;
    return b;
}

inline Schema sim2_schema() {
    Schema s;
    s.columns = {{"y1", ColumnKind::ordinal, 0},
                 {"y2", ColumnKind::continuous, 0},
                 {"y3", ColumnKind::continuous, 0},
                 {"y4", ColumnKind::nominal, 4}};
    return s;
}

// Simulation 2: equal-weight mixture on the 6-dim latent scale, margins
// pushed to Poisson(1), Gamma(1, scale 3) and t(2)+2 by quantile transforms,
// nominal category by the probit mapping on the last three latents.
inline Dataset gen_sim2(int n, Rng& rng) {
    require(n >= 1, "domain", "gen_sim2 needs n >= 1");
    const Matrix chol1 = Matrix(strict_llt(sim2_sigma1(), "sim2 Sigma1").matrixL());
    const Matrix chol2 = Matrix(strict_llt(sim2_sigma2(), "sim2 Sigma2").matrixL());
    Matrix cells(n, 4);
    for (int i = 0; i < n; ++i) {
        const int k = (rng.uniform() < 0.5) ? 0 : 1;
        Vector mean = Vector::Zero(6);
        mean.tail(3) = sim2_beta(k);
        const Vector z = sample_mvn_chol(rng, mean, k == 0 ? chol1 : chol2);
        cells(i, 0) = poisson_quantile(1.0, norm_cdf(z(0)));
        cells(i, 1) = -3.0 * std::log1p(-norm_cdf(z(1)));
        cells(i, 2) = t2_quantile(norm_cdf(z(2))) + 2.0;
        cells(i, 3) = static_cast<double>(map_nominal(z.tail(3)));
    }
    return dataset_from_matrix(sim2_schema(), cells);
}

inline constexpr double mar_gamma_10 = -1.35;
inline constexpr double mar_gamma_20 = -0.65;
inline constexpr double mar_gamma_30 = -0.31;

inline double mar_prob(double gamma, double y3) { return inv_logit(gamma * y3); }

// MAR mask: Y3 stays fully observed and drives the missingness of Y1, Y2, Y4
// through the inverse-logit link.
inline Dataset apply_mar(const Dataset& data, double gamma, Rng& rng) {
    require(data.schema.n_cols() == 4, "domain", "apply_mar expects the sim2 layout");
    for (int i = 0; i < data.n_rows(); ++i)
        require(data.observed(i, 2), "domain", "apply_mar requires a complete Y3 column");
    Dataset out = data;
    for (int i = 0; i < data.n_rows(); ++i) {
        const double pm = mar_prob(gamma, data.cells(i, 2));
        for (int j : {0, 1, 3})
            if (rng.uniform() < pm) out.mask(i, j) = true;
    }
    return out;
}

// The mixing toy: 0.5 N((-1,3), I) + 0.5 N((2,1), I) on the raw scale.
inline Matrix gen_toy_two_modes(int n, Rng& rng) {
    require(n >= 2, "domain", "gen_toy_two_modes needs n >= 2");
    Matrix x(n, 2);
    for (int i = 0; i < n; ++i) {
        if (rng.uniform() < 0.5) {
            x(i, 0) = -1.0 + rng.normal();
            x(i, 1) = 3.0 + rng.normal();
        } else {
            x(i, 0) = 2.0 + rng.normal();
            x(i, 1) = 1.0 + rng.normal();
        }
    }
    return x;
}

}  // namespace copmix
