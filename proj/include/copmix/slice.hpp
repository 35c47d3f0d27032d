#pragma once

#include <algorithm>
#include <vector>

#include "copmix/kernel.hpp"
#include "copmix/random_effects.hpp"

namespace copmix {

inline constexpr int stick_cap = 10000;

inline std::vector<std::vector<int>> cluster_members(const ChainState& s) {
    std::vector<std::vector<int>> members(static_cast<std::size_t>(s.n_components()));
    for (int i = 0; i < s.ctx->n_rows; ++i)
        members[static_cast<std::size_t>(s.alloc[static_cast<std::size_t>(i)])].push_back(i);
    return members;
}

// Occupied components get the conjugate beta/Sigma updates; retained but
// unoccupied components are refreshed from the prior.
inline void update_cluster_params(ChainState& s, const std::vector<std::vector<int>>& members) {
    for (int h = 0; h < s.n_components(); ++h) {
        const auto& mem = members[static_cast<std::size_t>(h)];
        if (mem.empty()) {
            s.clusters[static_cast<std::size_t>(h)] = sample_prior_cluster(*s.ctx, s.rng);
        } else {
            update_beta(s, h, mem);
            update_sigma(s, h, mem);
        }
    }
}

// v_h ~ Beta(1 + A_h, M + B_h) with A_h the occupancy of h and B_h the count
// allocated above h; weights rebuilt by stick breaking.
inline void update_sticks(ChainState& s) {
    const int H = s.n_components();
    std::vector<int> a(static_cast<std::size_t>(H), 0);
    std::vector<int> b(static_cast<std::size_t>(H), 0);
    for (int r : s.alloc) {
        ++a[static_cast<std::size_t>(r)];
        for (int h = 0; h < r; ++h) ++b[static_cast<std::size_t>(h)];
    }
    double remaining = 1.0;
    for (int h = 0; h < H; ++h) {
        s.v[static_cast<std::size_t>(h)] =
            s.rng.beta(1.0 + a[static_cast<std::size_t>(h)],
                       s.total_mass + b[static_cast<std::size_t>(h)]);
        s.w[static_cast<std::size_t>(h)] = s.v[static_cast<std::size_t>(h)] * remaining;
        remaining *= 1.0 - s.v[static_cast<std::size_t>(h)];
    }
}

inline void update_slice(ChainState& s) {
    for (int i = 0; i < s.ctx->n_rows; ++i)
        s.u[static_cast<std::size_t>(i)] =
            s.rng.uniform() * s.w[static_cast<std::size_t>(s.alloc[static_cast<std::size_t>(i)])];
}

// Append prior sticks until the instantiated mass exceeds 1 - min(u); returns
// k*, the minimal prefix length already satisfying the rule.
inline int extend_sticks(ChainState& s) {
    const double u_star = *std::min_element(s.u.begin(), s.u.end());
    const double target = 1.0 - u_star;
    double total = 0.0, remaining = 1.0;
    for (std::size_t h = 0; h < s.w.size(); ++h) {
        total += s.w[h];
        remaining *= 1.0 - s.v[h];
    }
    while (total <= target) {
        require(s.n_components() < stick_cap, "stick_cap",
                "more than 10^4 sticks requested; check the total mass parameter");
        const double v_new = s.rng.beta(1.0, s.total_mass);
        const double w_new = v_new * remaining;
        remaining *= 1.0 - v_new;
        s.v.push_back(v_new);
        s.w.push_back(w_new);
        s.clusters.push_back(sample_prior_cluster(*s.ctx, s.rng));
        total += w_new;
    }
    double prefix = 0.0;
    for (int h = 0; h < s.n_components(); ++h) {
        prefix += s.w[static_cast<std::size_t>(h)];
        if (prefix > target) return h + 1;
    }
    throw error("internal", "stick extension failed to reach the slice target");
}

// Gumbel-max draw from unnormalized log weights; shifting all weights by a
// constant cannot change the outcome for a fixed RNG state.
inline int gumbel_pick(Rng& rng, const std::vector<double>& log_weights) {
    require(!log_weights.empty(), "internal", "gumbel_pick with no candidates");
    int arg = -1;
    double best = neg_inf;
    for (std::size_t k = 0; k < log_weights.size(); ++k) {
        const double score = log_weights[k] + rng.gumbel();
        if (score > best) {
            best = score;
            arg = static_cast<int>(k);
        }
    }
    return arg;
}

inline void update_allocations(ChainState& s) {
    std::vector<double> logw;
    std::vector<int> cand;
    for (int i = 0; i < s.ctx->n_rows; ++i) {
        logw.clear();
        cand.clear();
        for (int h = 0; h < s.n_components(); ++h) {
            if (s.w[static_cast<std::size_t>(h)] > s.u[static_cast<std::size_t>(i)]) {
                cand.push_back(h);
                logw.push_back(alloc_loglik(s, i, h));
            }
        }
        require(!cand.empty(), "internal", "no eligible component for a row (slice invariant)");
        s.alloc[static_cast<std::size_t>(i)] = cand[static_cast<std::size_t>(gumbel_pick(s.rng, logw))];
    }
}

inline void drop_extra_components(ChainState& s, int k_star) {
    const int max_alloc = *std::max_element(s.alloc.begin(), s.alloc.end());
    const int keep = std::max(max_alloc + 1, k_star);
    if (keep >= s.n_components()) return;
    s.v.resize(static_cast<std::size_t>(keep));
    s.w.resize(static_cast<std::size_t>(keep));
    s.clusters.resize(static_cast<std::size_t>(keep));
}

// One full scan in the fixed order: random effects, per-component parameters,
// sticks, slice, extension, allocations, latent updates, write-back, drop.
inline void gibbs_sweep(ChainState& s) {
    update_random_effects(s);
    update_psi(s);
    auto members = cluster_members(s);
    update_cluster_params(s, members);
    if (s.ctx->kernel == Kernel::student_t) {
        update_phi(s);
        update_nu(s, members);
    }
    int k_star = 1;
    if (!s.single_component) {
        update_sticks(s);
        update_slice(s);
        k_star = extend_sticks(s);
        update_allocations(s);
    }
    if (!s.latent_frozen) {
        for (int i = 0; i < s.ctx->n_rows; ++i)
            for (int j = 0; j < s.ctx->p; ++j) gibbs_update_latent_ordered(s, i, j);
        if (s.ctx->q > 0)
            for (int i = 0; i < s.ctx->n_rows; ++i) gibbs_update_latent_nominal(s, i);
        impute_writeback(s);
    }
    if (!s.single_component) drop_extra_components(s, k_star);
    ++s.sweeps_done;
#ifndef NDEBUG
    if (s.sweeps_done % 100 == 0) {
        check_latent_consistency(s);
        check_state_invariants(s);
    }
#endif
}

inline int occupied_components(const ChainState& s) {
    std::vector<char> seen(static_cast<std::size_t>(s.n_components()), 0);
    int count = 0;
    for (int r : s.alloc) {
        if (!seen[static_cast<std::size_t>(r)]) {
            seen[static_cast<std::size_t>(r)] = 1;
            ++count;
        }
    }
    return count;
}

}  // namespace copmix
