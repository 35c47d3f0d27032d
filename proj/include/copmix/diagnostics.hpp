#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "copmix/kernel.hpp"

namespace copmix {

// LPML = sum_i log CPO_i with CPO_i the harmonic mean of the per-draw
// likelihoods; everything stays in log space (log-sum-exp of the negated
// log likelihoods) to dodge overflow.
inline double lpml(const Matrix& log_lik) {
    const Eigen::Index n_draws = log_lik.rows();
    const Eigen::Index n_obs = log_lik.cols();
    require(n_draws >= 1 && n_obs >= 1, "domain", "lpml needs a nonempty likelihood matrix");
    double total = 0.0;
    for (Eigen::Index i = 0; i < n_obs; ++i) {
        double m = neg_inf;
        for (Eigen::Index l = 0; l < n_draws; ++l) {
            require(std::isfinite(log_lik(l, i)), "domain", "nonfinite log likelihood in lpml");
            m = std::max(m, -log_lik(l, i));
        }
        double acc = 0.0;
        for (Eigen::Index l = 0; l < n_draws; ++l) acc += std::exp(-log_lik(l, i) - m);
        const double log_mean_inv = m + std::log(acc) - std::log(static_cast<double>(n_draws));
        total += -log_mean_inv;
    }
    return total;
}

// lambda = 2 T_{nu+1}( -sqrt(nu+1) sqrt((1-rho)/(1+rho)) ); elliptical copulas
// share the upper and lower coefficient.
inline double t_tail_dependence(double rho, double nu) {
    require(std::abs(rho) < 1.0, "domain", "t_tail_dependence requires |rho| < 1");
    require(nu > 0.0, "domain", "t_tail_dependence requires nu > 0");
    const double arg = -std::sqrt(nu + 1.0) * std::sqrt((1.0 - rho) / (1.0 + rho));
    return 2.0 * student_t_cdf(arg, nu + 1.0);
}

namespace detail {

inline std::vector<double> ecdf_ranks(const std::vector<double>& x) {
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> r(x.size());
    const double n1 = static_cast<double>(x.size()) + 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto rank = std::upper_bound(sorted.begin(), sorted.end(), x[i]) - sorted.begin();
        r[i] = static_cast<double>(rank) / n1;
    }
    return r;
}

}  // namespace detail

enum class TailSide { upper, lower };

// Empirical penultimate tail dependence at quantile level u, computed on the
// margins' empirical ranks so any strictly increasing marginal transform
// leaves it unchanged. Lower tail uses the symmetric 1-u convention.
inline double penultimate_tail_dep(const std::vector<double>& x, const std::vector<double>& y,
                                   double u, TailSide side) {
    require(u > 0.0 && u < 1.0, "domain", "quantile level must lie in (0,1)");
    require(x.size() == y.size() && !x.empty(), "domain", "need paired observations");
    const auto rx = detail::ecdf_ranks(x);
    const auto ry = detail::ecdf_ranks(y);
    long joint = 0, cond = 0;
    if (side == TailSide::upper) {
        for (std::size_t i = 0; i < rx.size(); ++i) {
            if (ry[i] > u) {
                ++cond;
                if (rx[i] > u) ++joint;
            }
        }
    } else {
        const double t = 1.0 - u;
        for (std::size_t i = 0; i < rx.size(); ++i) {
            if (ry[i] < t) {
                ++cond;
                if (rx[i] < t) ++joint;
            }
        }
    }
    return cond == 0 ? 0.0 : static_cast<double>(joint) / static_cast<double>(cond);
}

struct ReplicatedData {
    Matrix ordered_uniforms;      // N x p, kernel-CDF scale
    std::vector<int> categories;  // N when a nominal block exists
};

// Posterior predictive replicate: component by (renormalized) weight, latent
// row from that component, ordered margins mapped through the kernel CDF,
// nominal block through the probit mapping.
inline ReplicatedData replicate_dataset(const PosteriorDraw& draw, int n_rows, int p, int q,
                                        Kernel kernel, Rng& rng) {
    require(!draw.comps.empty(), "domain", "replicate_dataset needs at least one component");
    std::vector<Eigen::LLT<Matrix>> llts;
    llts.reserve(draw.comps.size());
    for (const auto& c : draw.comps)
        llts.push_back(safe_llt(c.sigma, "replicate component not PD"));
    ReplicatedData out;
    out.ordered_uniforms = Matrix::Zero(n_rows, p);
    if (q > 0) out.categories.resize(static_cast<std::size_t>(n_rows));
    for (int i = 0; i < n_rows; ++i) {
        const int h = rng.categorical(draw.weight);
        const auto& c = draw.comps[static_cast<std::size_t>(h)];
        Vector mean = Vector::Zero(p + q);
        mean.tail(q) = c.beta;
        const Vector z = kernel == Kernel::gaussian
                             ? sample_mvn_chol(rng, mean, llts[static_cast<std::size_t>(h)].matrixL())
                             : sample_mvt(rng, mean, llts[static_cast<std::size_t>(h)].matrixL(),
                                          c.nu);
        for (int j = 0; j < p; ++j)
            out.ordered_uniforms(i, j) =
                kernel == Kernel::gaussian ? norm_cdf(z(j)) : student_t_cdf(z(j), c.nu);
        if (q > 0) out.categories[static_cast<std::size_t>(i)] = map_nominal(z.tail(q));
    }
    return out;
}

struct TailCheck {
    int col_a = 0;
    int col_b = 1;
    double u = 0.9;
    TailSide side = TailSide::upper;
    double observed = 0.0;
    double rep_mean = 0.0;
    double rep_lo = 0.0;  // central 95% replicate interval
    double rep_hi = 0.0;
    double bayes_p = 0.0;  // fraction of replicates below the observed statistic
    bool covered = false;
};

struct DiagnosticsReport {
    double lpml_value = 0.0;
    std::vector<TailCheck> tail;
};

// Posterior predictive checks of the penultimate tail dependence for every
// ordered column pair at the requested quantile levels, both tails. An
// optional missingness mask restricts each pair's observed statistic to its
// pairwise-complete rows; replicates always use all N rows.
inline std::vector<TailCheck> ppc_tail_checks(
    const Matrix& observed_ordered, const std::vector<PosteriorDraw>& draws, int p, int q,
    Kernel kernel, const std::vector<double>& u_levels, int n_replicates, Rng& rng,
    const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>* missing_mask = nullptr) {
    require(p >= 2, "domain", "pairwise tail statistics need at least two ordered columns");
    require(!draws.empty(), "domain", "no posterior draws for replication");
    const int n_rows = static_cast<int>(observed_ordered.rows());

    struct Slot {
        TailCheck check;
        std::vector<double> reps;
    };
    std::vector<Slot> slots;
    for (int a = 0; a < p; ++a)
        for (int b = a + 1; b < p; ++b)
            for (double u : u_levels)
                for (TailSide side : {TailSide::upper, TailSide::lower}) {
                    Slot s;
                    s.check.col_a = a;
                    s.check.col_b = b;
                    s.check.u = u;
                    s.check.side = side;
                    slots.push_back(std::move(s));
                }

    const auto column = [](const Matrix& m, int j) {
        std::vector<double> out(static_cast<std::size_t>(m.rows()));
        for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, j);
        return out;
    };
    for (auto& s : slots) {
        std::vector<double> xa, xb;
        for (int i = 0; i < n_rows; ++i) {
            if (missing_mask != nullptr &&
                ((*missing_mask)(i, s.check.col_a) || (*missing_mask)(i, s.check.col_b)))
                continue;
            xa.push_back(observed_ordered(i, s.check.col_a));
            xb.push_back(observed_ordered(i, s.check.col_b));
        }
        require(!xa.empty(), "domain", "no pairwise-complete rows for a tail statistic");
        s.check.observed = penultimate_tail_dep(xa, xb, s.check.u, s.check.side);
    }
    for (int r = 0; r < n_replicates; ++r) {
        const auto& draw = draws[static_cast<std::size_t>(r) % draws.size()];
        const auto rep = replicate_dataset(draw, n_rows, p, q, kernel, rng);
        for (auto& s : slots)
            s.reps.push_back(penultimate_tail_dep(column(rep.ordered_uniforms, s.check.col_a),
                                                  column(rep.ordered_uniforms, s.check.col_b),
                                                  s.check.u, s.check.side));
    }
    std::vector<TailCheck> out;
    for (auto& s : slots) {
        std::vector<double> sorted = s.reps;
        std::sort(sorted.begin(), sorted.end());
        const auto nrep = sorted.size();
        double mean = 0.0;
        long below = 0;
        for (double v : s.reps) {
            mean += v;
            if (v < s.check.observed) ++below;
        }
        s.check.rep_mean = mean / static_cast<double>(nrep);
        s.check.bayes_p = static_cast<double>(below) / static_cast<double>(nrep);
        const auto lo_idx = static_cast<std::size_t>(std::floor(0.025 * (nrep - 1)));
        const auto hi_idx = static_cast<std::size_t>(std::ceil(0.975 * (nrep - 1)));
        s.check.rep_lo = sorted[lo_idx];
        s.check.rep_hi = sorted[hi_idx];
        s.check.covered = s.check.observed >= s.check.rep_lo && s.check.observed <= s.check.rep_hi;
        out.push_back(s.check);
    }
    return out;
}

}  // namespace copmix
