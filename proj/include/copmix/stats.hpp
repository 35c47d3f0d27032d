#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "copmix/common.hpp"
#include "copmix/rng.hpp"
#include "copmix/special.hpp"

namespace copmix {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();
inline constexpr double pos_inf = std::numeric_limits<double>::infinity();

// Cholesky that never jitters: used where a non-PD input is a caller error.
inline Eigen::LLT<Matrix> strict_llt(const Matrix& m, const char* what) {
    Eigen::LLT<Matrix> llt(m);
    require(llt.info() == Eigen::Success, "non_pd_matrix", what);
    return llt;
}

// Cholesky for matrices that should be PD (e.g. fresh Inverse-Wishart draws):
// one jittered retry of 1e-10*trace/d on the diagonal, then hard error.
inline Eigen::LLT<Matrix> safe_llt(const Matrix& m, const char* what) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success) return llt;
    const double jitter = 1e-10 * m.trace() / static_cast<double>(m.rows());
    Matrix bumped = m;
    bumped.diagonal().array() += jitter;
    llt.compute(bumped);
    require(llt.info() == Eigen::Success, "non_pd_matrix", what);
    return llt;
}

inline Matrix cov_to_corr(const Matrix& cov) {
    require(cov.rows() == cov.cols(), "domain", "cov_to_corr requires a square matrix");
    const Eigen::Index d = cov.rows();
    Vector inv_sd(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        require(cov(i, i) > 0.0, "domain", "cov_to_corr requires positive diagonal");
        inv_sd(i) = 1.0 / std::sqrt(cov(i, i));
    }
    Matrix corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
    corr = 0.5 * (corr + corr.transpose());
    corr.diagonal().setOnes();
    return corr;
}

// Draw from N(mean, sd^2) restricted to (lb, ub). Inverse-CDF through the
// nearer tail keeps full accuracy out to |z| ~ 37; beyond that a Robert
// exponential-rejection step takes over.
inline double sample_truncated_normal(Rng& rng, double mean, double sd, double lb, double ub) {
    require(sd > 0.0, "domain", "truncated normal requires sd > 0");
    require(lb < ub, "domain", "truncated normal requires lb < ub");
    const double a = (lb - mean) / sd;
    const double b = (ub - mean) / sd;
    if (a == neg_inf && b == pos_inf) return mean + sd * rng.normal();

    double z;
    if (a >= 0.0) {  // right tail: work with survival probabilities
        const double p_hi = norm_sf(a);
        const double p_lo = norm_sf(b);
        if (p_hi > 1e-290) {
            z = -norm_quantile(rng.uniform(p_lo, p_hi));
        } else {  // extreme tail, Robert (1995) shifted-exponential rejection
            const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
            for (;;) {
                const double x = a + rng.exponential() / alpha;
                if (x >= b) continue;
                const double d = x - alpha;
                if (std::log(rng.uniform()) <= -0.5 * d * d) {
                    z = x;
                    break;
                }
            }
        }
    } else if (b <= 0.0) {
        const double p_hi = norm_cdf(b);
        const double p_lo = norm_cdf(a);
        if (p_hi > 1e-290) {
            z = norm_quantile(rng.uniform(p_lo, p_hi));
        } else {
            const double a2 = -b;
            const double alpha = 0.5 * (a2 + std::sqrt(a2 * a2 + 4.0));
            for (;;) {
                const double x = a2 + rng.exponential() / alpha;
                if (x >= -a) continue;
                const double d = x - alpha;
                if (std::log(rng.uniform()) <= -0.5 * d * d) {
                    z = -x;
                    break;
                }
            }
        }
    } else {
        z = norm_quantile(rng.uniform(norm_cdf(a), norm_cdf(b)));
    }
    z = std::clamp(z, std::nextafter(a, pos_inf), std::nextafter(b, neg_inf));
    return mean + sd * z;
}

inline Vector sample_mvn_chol(Rng& rng, const Vector& mean, const Matrix& chol_lower) {
    Vector z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return mean + chol_lower * z;
}

inline Vector sample_mvn(Rng& rng, const Vector& mean, const Matrix& cov) {
    require(cov.rows() == cov.cols() && cov.rows() == mean.size(), "domain",
            "sample_mvn dimension mismatch");
    if (mean.size() == 0) return mean;
    const auto llt = strict_llt(cov, "sample_mvn covariance is not positive definite");
    return sample_mvn_chol(rng, mean, llt.matrixL());
}

// Bartlett decomposition: X = L A A' L' ~ Wishart(df, scale), L = chol(scale).
inline Matrix sample_wishart(Rng& rng, double df, const Matrix& scale) {
    const Eigen::Index d = scale.rows();
    require(df > static_cast<double>(d) - 1.0, "domain", "wishart requires df > d-1");
    const auto llt = strict_llt(scale, "wishart scale is not positive definite");
    Matrix a = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        a(i, i) = std::sqrt(rng.chi_squared(df - static_cast<double>(i)));
        for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
    }
    const Matrix la = Matrix(llt.matrixL()) * a;
    return la * la.transpose();
}

inline Matrix sample_inverse_wishart(Rng& rng, double df, const Matrix& scale) {
    const Eigen::Index d = scale.rows();
    require(is_symmetric(scale, 1e-10), "domain", "inverse wishart scale must be symmetric");
    require(df > static_cast<double>(d) - 1.0, "domain", "inverse wishart requires df > d-1");
    const auto scale_llt = strict_llt(scale, "inverse wishart scale is not positive definite");
    const Matrix scale_inv = scale_llt.solve(Matrix::Identity(d, d));
    const Matrix w = sample_wishart(rng, df, 0.5 * (scale_inv + scale_inv.transpose()));
    const auto w_llt = safe_llt(w, "wishart draw lost positive definiteness");
    Matrix x = w_llt.solve(Matrix::Identity(d, d));
    return 0.5 * (x + x.transpose());
}

struct ConditionalMvn {
    Vector mean;
    Matrix cov;
};

// Schur-complement conditional of N(mean, cov): target block given the
// `given` coordinates pinned at given_values.
inline ConditionalMvn conditional_mvn(const Vector& mean, const Matrix& cov,
                                      std::span<const int> target_idx,
                                      std::span<const int> given_idx,
                                      const Vector& given_values) {
    require(static_cast<Eigen::Index>(given_idx.size()) == given_values.size(), "domain",
            "conditional_mvn given index/value size mismatch");
    for (int t : target_idx)
        for (int g : given_idx)
            require(t != g, "domain", "conditional_mvn index sets must be disjoint");
    const auto nt = static_cast<Eigen::Index>(target_idx.size());
    const auto ng = static_cast<Eigen::Index>(given_idx.size());
    Matrix s_tt(nt, nt), s_tg(nt, ng), s_gg(ng, ng);
    Vector mu_t(nt), mu_g(ng);
    for (Eigen::Index i = 0; i < nt; ++i) {
        mu_t(i) = mean(target_idx[i]);
        for (Eigen::Index j = 0; j < nt; ++j) s_tt(i, j) = cov(target_idx[i], target_idx[j]);
        for (Eigen::Index j = 0; j < ng; ++j) s_tg(i, j) = cov(target_idx[i], given_idx[j]);
    }
    for (Eigen::Index i = 0; i < ng; ++i) {
        mu_g(i) = mean(given_idx[i]);
        for (Eigen::Index j = 0; j < ng; ++j) s_gg(i, j) = cov(given_idx[i], given_idx[j]);
    }
    if (ng == 0) return {mu_t, s_tt};
    const auto llt = strict_llt(s_gg, "conditional_mvn: singular given-block");
    ConditionalMvn out;
    out.mean = mu_t + s_tg * llt.solve(given_values - mu_g);
    out.cov = s_tt - s_tg * llt.solve(s_tg.transpose());
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

inline double mvn_logpdf(const Vector& x, const Vector& mean, const Eigen::LLT<Matrix>& llt) {
    const Eigen::Index d = x.size();
    const Vector half = llt.matrixL().solve(x - mean);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) log_det += std::log(llt.matrixL()(i, i));
    return -0.5 * d * log_2pi - log_det - 0.5 * half.squaredNorm();
}

inline double mvn_logpdf(const Vector& x, const Vector& mean, const Matrix& cov) {
    return mvn_logpdf(x, mean, strict_llt(cov, "mvn_logpdf covariance not PD"));
}

inline double mvt_logpdf(const Vector& x, const Vector& mean, const Eigen::LLT<Matrix>& llt,
                         double nu) {
    const Eigen::Index d = x.size();
    const Vector half = llt.matrixL().solve(x - mean);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) log_det += std::log(llt.matrixL()(i, i));
    return std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) -
           0.5 * d * std::log(nu * std::numbers::pi) - log_det -
           0.5 * (nu + d) * std::log1p(half.squaredNorm() / nu);
}

inline Vector sample_mvt(Rng& rng, const Vector& mean, const Matrix& chol_lower, double nu) {
    Vector z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    const double g = rng.chi_squared(nu) / nu;
    return mean + (chol_lower * z) / std::sqrt(g);
}

inline double inverse_wishart_logpdf(const Matrix& x, double df, const Matrix& scale) {
    const int d = static_cast<int>(x.rows());
    const auto x_llt = strict_llt(x, "inverse_wishart_logpdf: x not PD");
    const auto s_llt = strict_llt(scale, "inverse_wishart_logpdf: scale not PD");
    double log_det_x = 0.0, log_det_s = 0.0;
    for (int i = 0; i < d; ++i) {
        log_det_x += 2.0 * std::log(x_llt.matrixL()(i, i));
        log_det_s += 2.0 * std::log(s_llt.matrixL()(i, i));
    }
    const double tr = x_llt.solve(scale).trace();
    return 0.5 * df * log_det_s - 0.5 * df * d * std::log(2.0) - log_multigamma(0.5 * df, d) -
           0.5 * (df + d + 1.0) * log_det_x - 0.5 * tr;
}

}  // namespace copmix
