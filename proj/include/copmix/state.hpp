#pragma once

#include <optional>
#include <vector>

#include "copmix/data.hpp"
#include "copmix/rng.hpp"
#include "copmix/stats.hpp"

namespace copmix {

enum class Kernel { gaussian, student_t };

// t-kernel degrees of freedom live on a discrete grid; the lower end stays
// away from infinite-variance territory.
inline constexpr int nu_grid_min = 2;
inline constexpr int nu_grid_max = 30;

struct Hyperparams {
    Vector mu_beta;       // Q
    Matrix lambda_beta;   // Q x Q
    double nu_sigma = 0;  // >= p+Q so empty-cluster prior draws stay proper
    Matrix lambda_sigma;  // (p+Q) x (p+Q)
    double nu_psi = 0;    // random effects
    Matrix lambda_psi;

    static Hyperparams defaults(int p, int q) {
        const int d = p + q;
        Hyperparams h;
        h.mu_beta = Vector::Zero(q);
        h.lambda_beta = Matrix::Identity(q, q);
        h.nu_sigma = std::max(q + 2, d);
        h.lambda_sigma = Matrix::Identity(d, d);
        h.nu_psi = d + 2;
        h.lambda_psi = Matrix::Identity(d, d);
        return h;
    }

    void validate(int p, int q) const {
        const int d = p + q;
        require(mu_beta.size() == q && lambda_beta.rows() == q && lambda_beta.cols() == q,
                "config_invalid", "beta hyperparameter dimensions do not match Q");
        require(lambda_sigma.rows() == d && lambda_sigma.cols() == d, "config_invalid",
                "lambda_sigma dimension does not match p+Q");
        require(nu_sigma >= static_cast<double>(d), "config_invalid",
                "nu_sigma must be at least p+Q for proper empty-cluster draws");
        require(nu_psi > static_cast<double>(d) - 1.0, "config_invalid", "nu_psi too small");
    }
};

// One mixture component: mean offset beta on the nominal block, correlation
// matrix sigma plus the raw covariance it was rescaled from, and the t
// degrees of freedom when the t kernel is active. The cache fields are
// recomputed whenever sigma changes and are never persisted.
struct ClusterParams {
    Vector beta;
    Matrix sigma_tilde;
    Matrix sigma;
    double nu = nu_grid_max;

    // cache
    Vector mean;  // (0_p, beta)
    Eigen::LLT<Matrix> sigma_llt;
    double log_det_sigma = 0.0;
    std::vector<Vector> cond_coef;  // per coordinate: weights on the other coordinates
    std::vector<double> cond_sd;
    Matrix nominal_reg;  // Sigma_21 Sigma_1^{-1}  (Q x p)
    Matrix nominal_cov;  // Schur complement of the nominal block
    Eigen::LLT<Matrix> nominal_llt;

    void refresh_cache(int p, int q) {
        const int d = p + q;
        mean = Vector::Zero(d);
        mean.tail(q) = beta;
        sigma_llt = safe_llt(sigma, "cluster correlation lost positive definiteness");
        log_det_sigma = 0.0;
        for (int i = 0; i < d; ++i) log_det_sigma += 2.0 * std::log(sigma_llt.matrixL()(i, i));

        cond_coef.assign(d, Vector());
        cond_sd.assign(d, 1.0);
        for (int j = 0; j < d; ++j) {
            if (d == 1) {
                cond_coef[j] = Vector::Zero(0);
                cond_sd[j] = std::sqrt(sigma(0, 0));
                continue;
            }
            Matrix rest(d - 1, d - 1);
            Vector cross(d - 1);
            for (int a = 0, ia = 0; a < d; ++a) {
                if (a == j) continue;
                cross(ia) = sigma(a, j);
                for (int b = 0, ib = 0; b < d; ++b) {
                    if (b == j) continue;
                    rest(ia, ib) = sigma(a, b);
                    ++ib;
                }
                ++ia;
            }
            const auto llt = safe_llt(rest, "cluster conditional block lost PD");
            cond_coef[j] = llt.solve(cross);
            const double var = sigma(j, j) - cross.dot(cond_coef[j]);
            cond_sd[j] = std::sqrt(std::max(var, 1e-12));
        }

        if (q > 0) {
            if (p > 0) {
                const Matrix s1 = sigma.topLeftCorner(p, p);
                const Matrix s12 = sigma.topRightCorner(p, q);
                const auto llt1 = safe_llt(s1, "ordered block lost PD");
                nominal_reg = llt1.solve(s12).transpose();
                nominal_cov = sigma.bottomRightCorner(q, q) - nominal_reg * s12;
            } else {
                nominal_reg = Matrix::Zero(q, 0);
                nominal_cov = sigma;
            }
            nominal_cov = 0.5 * (nominal_cov + nominal_cov.transpose());
            nominal_llt = safe_llt(nominal_cov, "nominal conditional block lost PD");
        }
    }
};

// Everything immutable during sampling, shared by all tempering chains.
struct ModelContext {
    int n_rows = 0;
    int p = 0;
    int q = 0;
    Kernel kernel = Kernel::gaussian;
    Hyperparams hyper;
    const Dataset* data = nullptr;            // null in raw (clamped-latent) mode
    std::vector<EmpiricalCdf> ecdf;           // per ordered column
    std::vector<std::vector<int>> obs_rows;   // per ordered column
    int nominal_col = -1;
    bool random_effects = false;
    Matrix raw_points;  // raw mode only

    int latent_dim() const { return p + q; }

    static ModelContext from_dataset(const Dataset& data, Kernel kernel, Hyperparams hyper) {
        ModelContext ctx;
        ctx.n_rows = data.n_rows();
        ctx.p = data.schema.p();
        ctx.q = data.schema.q();
        ctx.kernel = kernel;
        require(!(kernel == Kernel::student_t && ctx.q > 0), "unsupported_config",
                "the t kernel does not support nominal variables");
        hyper.validate(ctx.p, ctx.q);
        ctx.hyper = std::move(hyper);
        ctx.data = &data;
        ctx.nominal_col = data.schema.has_nominal() ? ctx.p : -1;
        ctx.ecdf.reserve(ctx.p);
        ctx.obs_rows.resize(ctx.p);
        for (int j = 0; j < ctx.p; ++j) {
            ctx.ecdf.push_back(build_ecdf(observed_column(data, j)));
            for (int i = 0; i < ctx.n_rows; ++i)
                if (data.observed(i, j)) ctx.obs_rows[j].push_back(i);
        }
        if (!data.group.empty()) {
            require(!data.schema.group_column.empty(), "config_invalid", "group ids without schema");
            ctx.random_effects = true;
        }
        return ctx;
    }

    // Clamped-latent mode: the points are treated as directly observed latent
    // coordinates with free component means (used by the mixing toy).
    static ModelContext raw(const Matrix& points, Hyperparams hyper) {
        ModelContext ctx;
        ctx.n_rows = static_cast<int>(points.rows());
        ctx.p = 0;
        ctx.q = static_cast<int>(points.cols());
        hyper.validate(ctx.p, ctx.q);
        ctx.hyper = std::move(hyper);
        ctx.raw_points = points;
        return ctx;
    }
};

struct RandomEffectsState {
    bool enabled = false;
    bool pinned = false;  // keep b = 0 and skip updates (exact base-model reduction)
    std::vector<Vector> b;
    Matrix psi;
};

struct ChainState {
    const ModelContext* ctx = nullptr;
    double total_mass = 1.0;
    std::vector<double> v;  // stick fractions
    std::vector<double> w;  // stick weights
    std::vector<double> u;  // slice variables, per row
    std::vector<int> alloc;  // component index per row, 0-based
    std::vector<ClusterParams> clusters;
    Matrix latent;     // N x (p+Q)
    Matrix completed;  // N x n_cols on the data scale, missing cells imputed
    std::vector<double> phi;  // t-kernel row scales (all 1 under the Gaussian kernel)
    RandomEffectsState ranef;
    bool single_component = false;
    bool latent_frozen = false;
    long sweeps_done = 0;
    Rng rng;
    Vector zero_offset;

    ChainState() : rng(0) {}

    int n_components() const { return static_cast<int>(clusters.size()); }

    const Vector& ranef_offset(int row) const {
        if (!ranef.enabled) return zero_offset;
        return ranef.b[static_cast<std::size_t>(ctx->data->group[row])];
    }

    // swap everything except the total mass and the RNG stream
    void swap_payload(ChainState& other) {
        v.swap(other.v);
        w.swap(other.w);
        u.swap(other.u);
        alloc.swap(other.alloc);
        clusters.swap(other.clusters);
        latent.swap(other.latent);
        completed.swap(other.completed);
        phi.swap(other.phi);
        std::swap(ranef, other.ranef);
    }
};

// One stored (thinned, post-burn-in) draw of the target chain.
struct ComponentDraw {
    Vector beta;
    Matrix sigma;
    double nu = nu_grid_max;
};

struct PosteriorDraw {
    int iteration = 0;
    std::vector<double> weight;  // renormalized over instantiated components
    std::vector<ComponentDraw> comps;
};

}  // namespace copmix
