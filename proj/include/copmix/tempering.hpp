#pragma once

#include <cmath>
#include <functional>
#include <future>
#include <vector>

#include "copmix/slice.hpp"

namespace copmix {

// Increasing total-mass ladder; chain 1 (lowest M) is the inference target.
struct TemperingLadder {
    std::vector<double> m_values;

    explicit TemperingLadder(std::vector<double> ms) : m_values(std::move(ms)) { validate(); }

    int size() const { return static_cast<int>(m_values.size()); }

    void validate() const {
        require(!m_values.empty(), "config_invalid", "tempering ladder is empty");
        for (std::size_t k = 0; k < m_values.size(); ++k) {
            require(m_values[k] > 0.0, "config_invalid", "total mass values must be positive");
            if (k > 0)
                require(m_values[k] > m_values[k - 1], "config_invalid",
                        "tempering ladder must be strictly increasing");
        }
    }
};

// Log acceptance ratio for exchanging the full states of two chains that
// differ only in M. Likelihood, G0 and slice terms ride along with the
// swapped states and cancel; what survives is the stick-fraction prior
// Be(v; 1, M) = M (1-v)^{M-1} evaluated cross-wise.
inline double swap_log_ratio(const ChainState& chain_a, const ChainState& chain_b) {
    require(chain_a.ctx == chain_b.ctx, "config_invalid",
            "swap attempted between chains with different data or hyperparameters");
    const auto stick_logprior = [](const std::vector<double>& v, double m) {
        double s = 0.0;
        for (double vh : v) s += std::log(m) + (m - 1.0) * std::log1p(-vh);
        return s;
    };
    const double ma = chain_a.total_mass, mb = chain_b.total_mass;
    return stick_logprior(chain_b.v, ma) + stick_logprior(chain_a.v, mb) -
           stick_logprior(chain_a.v, ma) - stick_logprior(chain_b.v, mb);
}

struct SwapStats {
    std::vector<long> attempts;
    std::vector<long> accepts;

    double rate(int pair) const {
        const auto k = static_cast<std::size_t>(pair);
        return attempts[k] == 0 ? 0.0 : static_cast<double>(accepts[k]) / attempts[k];
    }
};

// Alternating adjacent pairs: (1,2),(3,4),... on even iterations and
// (2,3),(4,5),... on odd ones. States move wholesale; M stays in its slot.
inline void attempt_swaps(std::vector<ChainState>& chains, int iteration, Rng& orchestrator,
                          SwapStats& stats) {
    const int k0 = (iteration % 2 == 0) ? 0 : 1;
    for (int k = k0; k + 1 < static_cast<int>(chains.size()); k += 2) {
        const double log_ratio =
            swap_log_ratio(chains[static_cast<std::size_t>(k)], chains[static_cast<std::size_t>(k + 1)]);
        ++stats.attempts[static_cast<std::size_t>(k)];
        if (std::log(orchestrator.uniform()) < log_ratio) {
            chains[static_cast<std::size_t>(k)].swap_payload(chains[static_cast<std::size_t>(k + 1)]);
            ++stats.accepts[static_cast<std::size_t>(k)];
        }
    }
}

struct TraceRow {
    int iteration = 0;
    int chain = 0;
    double total_mass = 0.0;
    int occupied = 0;
    double loglik = 0.0;
};

struct RunControl {
    int n_iter = 10000;
    int burn_in = 5000;
    int draw_thin = 10;
    std::uint64_t seed = 1;
    int n_threads = 1;
    bool record_traces = true;
    bool single_component = false;
    bool pin_random_effects = false;  // keep b = 0, skip the b/Psi updates
    // called after the swap step of every iteration; chains[0] is the target
    std::function<void(int, const std::vector<ChainState>&)> observer;
};

struct RunResult {
    std::vector<PosteriorDraw> draws;
    SwapStats swaps;
    std::vector<TraceRow> traces;
};

inline PosteriorDraw snapshot_draw(const ChainState& s, int iteration) {
    PosteriorDraw d;
    d.iteration = iteration;
    double wsum = 0.0;
    for (double wh : s.w) wsum += wh;
    d.weight.reserve(s.w.size());
    for (double wh : s.w) d.weight.push_back(wh / wsum);
    d.comps.reserve(s.clusters.size());
    for (const auto& c : s.clusters) d.comps.push_back({c.beta, c.sigma, c.nu});
    return d;
}

inline double chain_loglik(const ChainState& s) {
    double total = 0.0;
    for (int i = 0; i < s.ctx->n_rows; ++i) total += mixture_row_logdensity(s, i);
    return total;
}

// Full tempered run: K chains advance each sweep (optionally split across
// threads; streams are per-chain so the schedule cannot change the draw),
// adjacent swaps between sweeps, thinned post-burn-in draws of the lowest-M
// chain collected.
inline RunResult run(const ModelContext& ctx, const TemperingLadder& ladder, const RunControl& rc) {
    require(rc.burn_in >= 0 && rc.burn_in < rc.n_iter, "config_invalid",
            "burn_in must be smaller than n_iter");
    require(rc.draw_thin >= 1, "config_invalid", "draw_thin must be positive");
    if (rc.single_component)
        require(ladder.size() == 1, "config_invalid", "single-copula mode uses one chain");

    const int n_chains = ladder.size();
    std::vector<ChainState> chains;
    chains.reserve(static_cast<std::size_t>(n_chains));
    for (int k = 0; k < n_chains; ++k) {
        chains.push_back(make_chain(ctx, ladder.m_values[static_cast<std::size_t>(k)],
                                    Rng(rc.seed, static_cast<std::uint64_t>(k) + 1),
                                    rc.single_component));
        if (rc.pin_random_effects) chains.back().ranef.pinned = true;
    }
    Rng orchestrator(rc.seed, 0);

    RunResult out;
    out.swaps.attempts.assign(static_cast<std::size_t>(std::max(0, n_chains - 1)), 0);
    out.swaps.accepts.assign(static_cast<std::size_t>(std::max(0, n_chains - 1)), 0);

    const int groups = std::max(1, std::min(rc.n_threads, n_chains));
    for (int iter = 1; iter <= rc.n_iter; ++iter) {
        if (groups == 1) {
            for (auto& c : chains) gibbs_sweep(c);
        } else {
            std::vector<std::future<void>> futs;
            for (int g = 1; g < groups; ++g)
                futs.push_back(std::async(std::launch::async, [&chains, g, groups, n_chains] {
                    for (int k = g; k < n_chains; k += groups)
                        gibbs_sweep(chains[static_cast<std::size_t>(k)]);
                }));
            for (int k = 0; k < n_chains; k += groups)
                gibbs_sweep(chains[static_cast<std::size_t>(k)]);
            for (auto& f : futs) f.get();
        }
        if (n_chains > 1) attempt_swaps(chains, iter, orchestrator, out.swaps);
        if (rc.record_traces) {
            for (int k = 0; k < n_chains; ++k) {
                const auto& c = chains[static_cast<std::size_t>(k)];
                out.traces.push_back(
                    {iter, k, c.total_mass, occupied_components(c), chain_loglik(c)});
            }
        }
        if (iter > rc.burn_in && (iter - rc.burn_in) % rc.draw_thin == 0)
            out.draws.push_back(snapshot_draw(chains.front(), iter));
        if (rc.observer) rc.observer(iter, chains);
    }
    return out;
}

}  // namespace copmix
