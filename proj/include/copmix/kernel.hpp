#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "copmix/state.hpp"

namespace copmix {

struct LatentBounds {
    double lb = neg_inf;
    double ub = pos_inf;
};

// Rank constraints of the extended rank likelihood: the latent cell must sit
// above every latent whose observed y is strictly smaller and below every
// latent whose observed y is strictly larger. Ties impose no constraint.
inline LatentBounds latent_bounds(const ChainState& s, int row, int col) {
    LatentBounds b;
    const Dataset& data = *s.ctx->data;
    const double y = data.cells(row, col);
    for (int t : s.ctx->obs_rows[col]) {
        if (t == row) continue;
        const double yt = data.cells(t, col);
        if (yt < y)
            b.lb = std::max(b.lb, s.latent(t, col));
        else if (yt > y)
            b.ub = std::min(b.ub, s.latent(t, col));
    }
    return b;
}

// Multinomial-probit mapping: category q (1-based position) when the largest
// nominal latent is positive, baseline 0 otherwise. An exact-zero maximum
// resolves to the baseline.
inline int map_nominal(const Vector& z2) {
    int arg = 0;
    for (int k = 1; k < z2.size(); ++k)
        if (z2(k) > z2(arg)) arg = k;
    return (z2.size() > 0 && z2(arg) > 0.0) ? arg + 1 : 0;
}

inline ClusterParams sample_prior_cluster(const ModelContext& ctx, Rng& rng) {
    ClusterParams c;
    c.beta = sample_mvn(rng, ctx.hyper.mu_beta, ctx.hyper.lambda_beta);
    c.sigma_tilde = sample_inverse_wishart(rng, ctx.hyper.nu_sigma, ctx.hyper.lambda_sigma);
    c.sigma = cov_to_corr(c.sigma_tilde);
    if (ctx.kernel == Kernel::student_t)
        c.nu = static_cast<double>(rng.uniform_int(nu_grid_min, nu_grid_max));
    c.refresh_cache(ctx.p, ctx.q);
    return c;
}

struct GaussianPosterior {
    Vector mean;
    Matrix cov;
};

// Conjugate update of the probit mean offset. Member rows enter through the
// conditional z_(2) | z_(1) regression; under the t kernel each row carries
// its scale-mixture weight phi_i.
inline GaussianPosterior beta_posterior_moments(const ChainState& s, int h,
                                                const std::vector<int>& members) {
    const ModelContext& ctx = *s.ctx;
    const int p = ctx.p, q = ctx.q;
    const ClusterParams& c = s.clusters[static_cast<std::size_t>(h)];
    const Matrix lambda_beta_inv =
        strict_llt(ctx.hyper.lambda_beta, "lambda_beta not PD").solve(Matrix::Identity(q, q));
    if (members.empty()) return {ctx.hyper.mu_beta, ctx.hyper.lambda_beta};

    double phi_sum = 0.0;
    Vector m_sum = Vector::Zero(q);
    for (int i : members) {
        const Vector z = s.latent.row(i).transpose() - s.ranef_offset(i);
        Vector m = z.tail(q);
        if (p > 0) m -= c.nominal_reg * z.head(p);
        const double phi = s.phi[static_cast<std::size_t>(i)];
        phi_sum += phi;
        m_sum += phi * m;
    }
    const Matrix v_inv = c.nominal_llt.solve(Matrix::Identity(q, q));
    const Matrix prec = lambda_beta_inv + phi_sum * v_inv;
    const auto prec_llt = safe_llt(prec, "beta posterior precision lost PD");
    GaussianPosterior out;
    out.cov = prec_llt.solve(Matrix::Identity(q, q));
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    out.mean = prec_llt.solve(lambda_beta_inv * ctx.hyper.mu_beta + v_inv * m_sum);
    return out;
}

inline void update_beta(ChainState& s, int h, const std::vector<int>& members) {
    if (s.ctx->q == 0) {
        s.clusters[static_cast<std::size_t>(h)].beta = Vector::Zero(0);
        return;
    }
    const auto post = beta_posterior_moments(s, h, members);
    s.clusters[static_cast<std::size_t>(h)].beta = sample_mvn(s.rng, post.mean, post.cov);
}

inline void update_sigma(ChainState& s, int h, const std::vector<int>& members) {
    const ModelContext& ctx = *s.ctx;
    ClusterParams& c = s.clusters[static_cast<std::size_t>(h)];
    const int d = ctx.latent_dim();
    Vector mu = Vector::Zero(d);
    mu.tail(ctx.q) = c.beta;
    Matrix scatter = ctx.hyper.lambda_sigma;
    for (int i : members) {
        const Vector eps = s.latent.row(i).transpose() - s.ranef_offset(i) - mu;
        scatter += s.phi[static_cast<std::size_t>(i)] * (eps * eps.transpose());
    }
    const double df = ctx.hyper.nu_sigma + static_cast<double>(members.size());
    c.sigma_tilde = sample_inverse_wishart(s.rng, df, scatter);
    c.sigma = cov_to_corr(c.sigma_tilde);
    c.refresh_cache(ctx.p, ctx.q);
}

// One ordered-block latent cell: its univariate conditional under the row's
// component, truncated to the rank bounds when the data cell is observed.
inline void gibbs_update_latent_ordered(ChainState& s, int row, int col) {
    const ClusterParams& c = s.clusters[static_cast<std::size_t>(s.alloc[row])];
    const int d = s.ctx->latent_dim();
    const Vector mu = c.mean + s.ranef_offset(row);
    double shift = 0.0;
    const Vector& coef = c.cond_coef[static_cast<std::size_t>(col)];
    for (int a = 0, ia = 0; a < d; ++a) {
        if (a == col) continue;
        shift += coef(ia++) * (s.latent(row, a) - mu(a));
    }
    const double cond_mean = mu(col) + shift;
    const double cond_sd = c.cond_sd[static_cast<std::size_t>(col)] /
                           std::sqrt(s.phi[static_cast<std::size_t>(row)]);
    LatentBounds b;
    if (s.ctx->data->observed(row, col)) b = latent_bounds(s, row, col);
    s.latent(row, col) = sample_truncated_normal(s.rng, cond_mean, cond_sd, b.lb, b.ub);
}

namespace detail {

// Coordinate-wise Gibbs pass on the nominal block restricted to the region
// implied by the observed category; the entering point already satisfies the
// constraint, so each univariate truncation keeps the chain inside it.
inline void nominal_constrained_pass(ChainState& s, int row, int category) {
    const ModelContext& ctx = *s.ctx;
    const int p = ctx.p, q = ctx.q, d = p + q;
    const ClusterParams& c = s.clusters[static_cast<std::size_t>(s.alloc[row])];
    const Vector mu = c.mean + s.ranef_offset(row);
    const double sqrt_phi = std::sqrt(s.phi[static_cast<std::size_t>(row)]);

    std::vector<int> order;
    if (category == 0) {
        for (int k = 0; k < q; ++k) order.push_back(k);
    } else {
        order.push_back(category - 1);
        for (int k = 0; k < q; ++k)
            if (k != category - 1) order.push_back(k);
    }
    for (int k : order) {
        const int g = p + k;
        double shift = 0.0;
        const Vector& coef = c.cond_coef[static_cast<std::size_t>(g)];
        for (int a = 0, ia = 0; a < d; ++a) {
            if (a == g) continue;
            shift += coef(ia++) * (s.latent(row, a) - mu(a));
        }
        const double m = mu(g) + shift;
        const double sd = c.cond_sd[static_cast<std::size_t>(g)] / sqrt_phi;
        double lb = neg_inf, ub = pos_inf;
        if (category == 0) {
            ub = 0.0;
        } else if (k == category - 1) {
            lb = 0.0;
            for (int k2 = 0; k2 < q; ++k2)
                if (k2 != k) lb = std::max(lb, s.latent(row, p + k2));
        } else {
            ub = s.latent(row, p + category - 1);
        }
        s.latent(row, g) = sample_truncated_normal(s.rng, m, sd, lb, ub);
    }
}

}  // namespace detail

// Nominal-block latent row: the conditional Gaussian given the ordered block,
// rejected until the probit mapping matches the observed category (capped at
// 100 tries, then one constrained coordinate-wise pass).
inline void gibbs_update_latent_nominal(ChainState& s, int row) {
    const ModelContext& ctx = *s.ctx;
    const int p = ctx.p, q = ctx.q;
    if (q == 0) return;
    const ClusterParams& c = s.clusters[static_cast<std::size_t>(s.alloc[row])];
    const Vector off = s.ranef_offset(row);
    Vector m = c.beta + off.tail(q);
    if (p > 0)
        m += c.nominal_reg * (s.latent.row(row).head(p).transpose() - off.head(p));
    const double inv_sqrt_phi = 1.0 / std::sqrt(s.phi[static_cast<std::size_t>(row)]);
    const Matrix chol = Matrix(c.nominal_llt.matrixL()) * inv_sqrt_phi;

    const bool observed = s.ctx->data->observed(row, ctx.nominal_col);
    if (!observed) {
        s.latent.row(row).tail(q) = sample_mvn_chol(s.rng, m, chol).transpose();
        return;
    }
    const int category = static_cast<int>(s.ctx->data->cells(row, ctx.nominal_col));
    for (int attempt = 0; attempt < 100; ++attempt) {
        const Vector z2 = sample_mvn_chol(s.rng, m, chol);
        if (map_nominal(z2) == category) {
            s.latent.row(row).tail(q) = z2.transpose();
            return;
        }
    }
    detail::nominal_constrained_pass(s, row, category);
}

// --- t-kernel scale mixture -------------------------------------------------

inline double phi_quadratic_form(const ChainState& s, int row) {
    const ClusterParams& c = s.clusters[static_cast<std::size_t>(s.alloc[row])];
    const Vector r = s.latent.row(row).transpose() - s.ranef_offset(row) - c.mean;
    return c.sigma_llt.matrixL().solve(r).squaredNorm();
}

// z_i | phi_i ~ N(mu, Sigma/phi_i), phi_i ~ Gamma(nu/2, nu/2) gives the
// conjugate Gamma((nu+d)/2, (nu+q_i)/2) conditional.
inline void update_phi(ChainState& s) {
    const int d = s.ctx->latent_dim();
    for (int i = 0; i < s.ctx->n_rows; ++i) {
        const double nu = s.clusters[static_cast<std::size_t>(s.alloc[i])].nu;
        const double quad = phi_quadratic_form(s, i);
        s.phi[static_cast<std::size_t>(i)] =
            s.rng.gamma(0.5 * (nu + d), 0.5 * (nu + quad));
    }
}

// Discrete Metropolis step for each occupied component's degrees of freedom:
// +-1 on the grid {2,...,30}, uniform prior, proposals off the grid rejected.
inline void update_nu(ChainState& s, const std::vector<std::vector<int>>& members) {
    for (int h = 0; h < s.n_components(); ++h) {
        if (members[static_cast<std::size_t>(h)].empty()) continue;
        ClusterParams& c = s.clusters[static_cast<std::size_t>(h)];
        const double step = (s.rng.uniform() < 0.5) ? -1.0 : 1.0;
        const double proposal = c.nu + step;
        const double u = s.rng.uniform();
        if (proposal < nu_grid_min || proposal > nu_grid_max) continue;
        double log_ratio = 0.0;
        for (int i : members[static_cast<std::size_t>(h)]) {
            const double phi = s.phi[static_cast<std::size_t>(i)];
            log_ratio += log_gamma_pdf(phi, 0.5 * proposal, 0.5 * proposal) -
                         log_gamma_pdf(phi, 0.5 * c.nu, 0.5 * c.nu);
        }
        if (std::log(u) < log_ratio) c.nu = proposal;
    }
}

// --- densities ---------------------------------------------------------------

// Gibbs allocation weight of row i under component h: the scale-mixture
// conditional given phi_i, including the Gamma(phi_i; nu_h/2, nu_h/2) factor
// that does not cancel when nu varies across components.
inline double alloc_loglik(const ChainState& s, int row, int h) {
    const ClusterParams& c = s.clusters[static_cast<std::size_t>(h)];
    const int d = s.ctx->latent_dim();
    const Vector r = s.latent.row(row).transpose() - s.ranef_offset(row) - c.mean;
    const double quad = c.sigma_llt.matrixL().solve(r).squaredNorm();
    if (s.ctx->kernel == Kernel::gaussian)
        return -0.5 * (d * log_2pi + c.log_det_sigma + quad);
    const double phi = s.phi[static_cast<std::size_t>(row)];
    return -0.5 * d * log_2pi + 0.5 * d * std::log(phi) - 0.5 * c.log_det_sigma -
           0.5 * phi * quad + log_gamma_pdf(phi, 0.5 * c.nu, 0.5 * c.nu);
}

// Integrated component density (t kernel marginalizes phi).
inline double component_logdensity(const ChainState& s, int row, int h) {
    const ClusterParams& c = s.clusters[static_cast<std::size_t>(h)];
    const Vector z = s.latent.row(row).transpose() - s.ranef_offset(row);
    if (s.ctx->kernel == Kernel::gaussian) return mvn_logpdf(z, c.mean, c.sigma_llt);
    return mvt_logpdf(z, c.mean, c.sigma_llt, c.nu);
}

inline double logsumexp(const std::vector<double>& xs) {
    double m = neg_inf;
    for (double x : xs) m = std::max(m, x);
    if (m == neg_inf) return neg_inf;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - m);
    return m + std::log(acc);
}

// Latent-scale mixture log density of one row, weights renormalized over the
// instantiated components.
inline double mixture_row_logdensity(const ChainState& s, int row) {
    double wsum = 0.0;
    for (double wh : s.w) wsum += wh;
    std::vector<double> terms(s.w.size());
    for (int h = 0; h < s.n_components(); ++h)
        terms[static_cast<std::size_t>(h)] =
            std::log(s.w[static_cast<std::size_t>(h)] / wsum) + component_logdensity(s, row, h);
    return logsumexp(terms);
}

// Copula-scale density: the mixture density of the latent row divided by the
// product of the mixture's own univariate margins. This is the per-row
// likelihood used for CPO/LPML and posterior predictive work; on the rank
// scale it is the quantity the fit comparisons are made on.
inline double copula_row_logdensity(const ChainState& s, int row) {
    const int d = s.ctx->latent_dim();
    double wsum = 0.0;
    for (double wh : s.w) wsum += wh;
    const Vector z = s.latent.row(row).transpose() - s.ranef_offset(row);
    std::vector<double> terms(s.w.size());
    double out = mixture_row_logdensity(s, row);
    for (int j = 0; j < d; ++j) {
        for (int h = 0; h < s.n_components(); ++h) {
            const ClusterParams& c = s.clusters[static_cast<std::size_t>(h)];
            const double x = z(j) - c.mean(j);
            const double lw = std::log(s.w[static_cast<std::size_t>(h)] / wsum);
            terms[static_cast<std::size_t>(h)] =
                lw + (s.ctx->kernel == Kernel::gaussian ? log_norm_pdf(x)
                                                        : log_student_t_pdf(x, c.nu));
        }
        out -= logsumexp(terms);
    }
    return out;
}

// --- imputation write-back ----------------------------------------------------

// Missing ordered cells map through the kernel CDF and the empirical inverse;
// missing nominal cells follow the probit mapping of the current latents.
inline void impute_writeback(ChainState& s) {
    const ModelContext& ctx = *s.ctx;
    if (ctx.data == nullptr) return;
    const Dataset& data = *ctx.data;
    for (int j = 0; j < ctx.p; ++j) {
        for (int i = 0; i < ctx.n_rows; ++i) {
            if (data.observed(i, j)) continue;
            const double z = s.latent(i, j);
            const double u = ctx.kernel == Kernel::gaussian
                                 ? norm_cdf(z)
                                 : student_t_cdf(z, s.clusters[static_cast<std::size_t>(
                                                                   s.alloc[i])].nu);
            s.completed(i, j) = ctx.ecdf[static_cast<std::size_t>(j)].inverse(u);
        }
    }
    if (ctx.nominal_col >= 0) {
        for (int i = 0; i < ctx.n_rows; ++i) {
            if (data.observed(i, ctx.nominal_col)) continue;
            const Vector z2 = s.latent.row(i).tail(ctx.q).transpose();
            s.completed(i, ctx.nominal_col) = static_cast<double>(map_nominal(z2));
        }
    }
}

// --- chain construction --------------------------------------------------------

inline Matrix initial_latent(const ModelContext& ctx) {
    if (ctx.data == nullptr) return ctx.raw_points;
    const Dataset& data = *ctx.data;
    Matrix z = Matrix::Zero(ctx.n_rows, ctx.latent_dim());
    for (int j = 0; j < ctx.p; ++j)
        for (int i = 0; i < ctx.n_rows; ++i)
            if (data.observed(i, j))
                z(i, j) = norm_quantile(ctx.ecdf[static_cast<std::size_t>(j)].eval(data.cells(i, j)));
    if (ctx.nominal_col >= 0) {
        for (int i = 0; i < ctx.n_rows; ++i) {
            if (!data.observed(i, ctx.nominal_col)) continue;
            const int cat = static_cast<int>(data.cells(i, ctx.nominal_col));
            for (int k = 0; k < ctx.q; ++k)
                z(i, ctx.p + k) = (cat >= 1 && k == cat - 1) ? 0.5 : -0.5;
        }
    }
    return z;
}

inline ChainState make_chain(const ModelContext& ctx, double total_mass, Rng rng,
                             bool single_component = false) {
    require(total_mass > 0.0, "config_invalid", "total mass must be positive");
    ChainState s;
    s.ctx = &ctx;
    s.total_mass = total_mass;
    s.rng = rng;
    s.single_component = single_component;
    s.zero_offset = Vector::Zero(ctx.latent_dim());
    s.latent = initial_latent(ctx);
    s.latent_frozen = (ctx.data == nullptr);
    s.phi.assign(static_cast<std::size_t>(ctx.n_rows), 1.0);
    s.alloc.assign(static_cast<std::size_t>(ctx.n_rows), 0);
    s.clusters.push_back(sample_prior_cluster(ctx, s.rng));
    if (single_component) {
        s.v = {0.5};
        s.w = {0.5};
        s.u.assign(static_cast<std::size_t>(ctx.n_rows), 0.25);
    } else {
        const double v0 = s.rng.beta(1.0 + ctx.n_rows, total_mass);
        s.v = {v0};
        s.w = {v0};
        s.u.resize(static_cast<std::size_t>(ctx.n_rows));
        for (auto& ui : s.u) ui = s.rng.uniform() * v0;
    }
    if (ctx.random_effects) {
        s.ranef.enabled = true;
        s.ranef.b.assign(static_cast<std::size_t>(ctx.data->n_groups),
                         Vector::Zero(ctx.latent_dim()));
        s.ranef.psi = ctx.hyper.lambda_psi;
    }
    if (ctx.data != nullptr) {
        s.completed = ctx.data->cells;
        impute_writeback(s);
    }
    return s;
}

// --- invariants -----------------------------------------------------------------

// Ordering consistency on observed ordered cells and probit consistency on
// observed nominal cells; called every 100th sweep in debug builds.
inline void check_latent_consistency(const ChainState& s) {
    const ModelContext& ctx = *s.ctx;
    if (ctx.data == nullptr) return;
    const Dataset& data = *ctx.data;
    for (int j = 0; j < ctx.p; ++j) {
        std::vector<int> rows = ctx.obs_rows[static_cast<std::size_t>(j)];
        std::sort(rows.begin(), rows.end(), [&](int a, int b) {
            return data.cells(a, j) < data.cells(b, j);
        });
        // the max latent of each tied value group must stay below the min of
        // the next group; within a group there is no constraint
        double prev_max = neg_inf;
        std::size_t g = 0;
        while (g < rows.size()) {
            std::size_t e = g;
            double zmin = s.latent(rows[g], j), zmax = zmin;
            while (e + 1 < rows.size() && data.cells(rows[e + 1], j) == data.cells(rows[g], j)) {
                ++e;
                zmin = std::min(zmin, s.latent(rows[e], j));
                zmax = std::max(zmax, s.latent(rows[e], j));
            }
            require(prev_max < zmin, "internal",
                    "latent ordering violated in column " + std::to_string(j));
            prev_max = zmax;
            g = e + 1;
        }
    }
    if (ctx.nominal_col >= 0) {
        for (int i = 0; i < ctx.n_rows; ++i) {
            if (!data.observed(i, ctx.nominal_col)) continue;
            const Vector z2 = s.latent.row(i).tail(ctx.q).transpose();
            require(map_nominal(z2) == static_cast<int>(data.cells(i, ctx.nominal_col)),
                    "internal", "probit category violated at row " + std::to_string(i));
        }
    }
}

inline void check_state_invariants(const ChainState& s) {
    // the unallocated mass is the product of (1 - v_h); a plain sum of the
    // weights saturates at 1.0 in floating point long before the mass is
    // actually exhausted
    double remaining = 1.0;
    for (std::size_t h = 0; h < s.w.size(); ++h) {
        require(s.w[h] > 0.0, "internal", "nonpositive stick weight");
        remaining *= 1.0 - s.v[h];
    }
    if (!s.single_component)
        require(remaining > 0.0, "internal", "stick weights exhausted the unit mass");
    require(s.v.size() == s.w.size() && s.clusters.size() == s.w.size(), "internal",
            "stick bookkeeping out of sync");
    for (int i = 0; i < s.ctx->n_rows; ++i) {
        const int h = s.alloc[static_cast<std::size_t>(i)];
        require(h >= 0 && h < s.n_components(), "internal", "allocation out of range");
        if (!s.single_component)
            require(s.u[static_cast<std::size_t>(i)] < s.w[static_cast<std::size_t>(h)],
                    "internal", "slice variable above its stick weight");
    }
}

}  // namespace copmix
