#pragma once

#include <vector>

#include "copmix/kernel.hpp"

namespace copmix {

// Group-level offsets on the latent space: z_i = b_{c(i)} + component draw.
// The conditional for b_c is the usual Gaussian precision-weighted form with
// the allocated component supplying each member's precision.
inline GaussianPosterior ranef_posterior_moments(const ChainState& s, int group) {
    const ModelContext& ctx = *s.ctx;
    const int d = ctx.latent_dim();
    const Matrix psi_inv =
        strict_llt(s.ranef.psi, "psi not PD").solve(Matrix::Identity(d, d));
    Matrix prec = psi_inv;
    Vector shift = Vector::Zero(d);
    for (int i = 0; i < ctx.n_rows; ++i) {
        if (ctx.data->group[static_cast<std::size_t>(i)] != group) continue;
        const ClusterParams& c = s.clusters[static_cast<std::size_t>(s.alloc[i])];
        const Matrix sig_inv =
            c.sigma_llt.solve(Matrix::Identity(d, d)) * s.phi[static_cast<std::size_t>(i)];
        prec += sig_inv;
        shift += sig_inv * (s.latent.row(i).transpose() - c.mean);
    }
    const auto llt = safe_llt(prec, "random-effect precision lost PD");
    GaussianPosterior out;
    out.cov = llt.solve(Matrix::Identity(d, d));
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    out.mean = llt.solve(shift);
    return out;
}

inline void update_random_effects(ChainState& s) {
    if (!s.ranef.enabled || s.ranef.pinned) return;
    for (int c = 0; c < static_cast<int>(s.ranef.b.size()); ++c) {
        const auto post = ranef_posterior_moments(s, c);
        s.ranef.b[static_cast<std::size_t>(c)] = sample_mvn(s.rng, post.mean, post.cov);
    }
}

inline void update_psi(ChainState& s) {
    if (!s.ranef.enabled || s.ranef.pinned) return;
    const ModelContext& ctx = *s.ctx;
    Matrix scatter = ctx.hyper.lambda_psi;
    for (const Vector& bc : s.ranef.b) scatter += bc * bc.transpose();
    const double df = ctx.hyper.nu_psi + static_cast<double>(s.ranef.b.size());
    s.ranef.psi = sample_inverse_wishart(s.rng, df, scatter);
}

}  // namespace copmix
