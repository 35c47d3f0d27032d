#pragma once

#include <atomic>
#include <cmath>
#include <future>
#include <map>
#include <sstream>
#include <vector>

#include "copmix/engine.hpp"
#include "copmix/simulate.hpp"

namespace copmix {

enum class ModelKind { single_gaussian, single_t, dpm_gaussian, dpm_t };

inline std::string model_name(ModelKind m) {
    switch (m) {
        case ModelKind::single_gaussian: return "single_gaussian";
        case ModelKind::single_t: return "single_t";
        case ModelKind::dpm_gaussian: return "dpm_gaussian";
        case ModelKind::dpm_t: return "dpm_t";
    }
    return "?";
}

inline ModelKind parse_model(const std::string& name) {
    if (name == "single_gaussian") return ModelKind::single_gaussian;
    if (name == "single_t") return ModelKind::single_t;
    if (name == "dpm_gaussian") return ModelKind::dpm_gaussian;
    if (name == "dpm_t") return ModelKind::dpm_t;
    throw error("config_invalid", "unknown model '" + name + "'");
}

struct FitOptions {
    ModelKind model = ModelKind::dpm_gaussian;
    std::vector<double> dpm_ladder{0.005, 0.01, 0.05, 0.1, 0.5, 0.8, 1.1, 1.4, 1.7, 2.0};
    int n_iter = 10000;
    int burn_in = 5000;
    int draw_thin = 10;
    std::uint64_t seed = 1;
    int m_imputations = 0;   // 0: no imputation snapshots
    int n_replicates = 0;    // 0: skip posterior predictive checks
    std::vector<double> u_levels{0.95, 0.9, 0.85};
};

struct FitOutput {
    double lpml_value = 0.0;
    std::vector<TailCheck> tail;
    std::vector<PosteriorDraw> draws;
    std::vector<ImputedDraw> imputations;
};

// One model fit on one dataset: tempered DPM or single-copula run with CPO
// accumulation, optional imputation snapshots and tail-dependence checks.
inline FitOutput fit_model(const Dataset& data, const FitOptions& opt) {
    const bool is_single =
        opt.model == ModelKind::single_gaussian || opt.model == ModelKind::single_t;
    const Kernel kernel =
        (opt.model == ModelKind::single_t || opt.model == ModelKind::dpm_t)
            ? Kernel::student_t
            : Kernel::gaussian;
    const ModelContext ctx = ModelContext::from_dataset(
        data, kernel, Hyperparams::defaults(data.schema.p(), data.schema.q()));

    RunControl rc;
    rc.n_iter = opt.n_iter;
    rc.burn_in = opt.burn_in;
    rc.draw_thin = opt.draw_thin;
    rc.seed = opt.seed;
    rc.single_component = is_single;
    rc.record_traces = false;

    std::optional<ImputationCollector> collector;
    if (opt.m_imputations > 0) collector.emplace(opt.n_iter, opt.burn_in, opt.m_imputations);
    std::vector<std::vector<double>> ll_rows;
    rc.observer = [&](int iter, const std::vector<ChainState>& chains) {
        const ChainState& target = chains.front();
        if (collector) collector->observe(iter, target);
        // CPO terms at the same thinned iterations as the stored draws
        if (iter > opt.burn_in && (iter - opt.burn_in) % opt.draw_thin == 0) {
            std::vector<double> row(static_cast<std::size_t>(ctx.n_rows));
            for (int i = 0; i < ctx.n_rows; ++i)
                row[static_cast<std::size_t>(i)] = copula_row_logdensity(target, i);
            ll_rows.push_back(std::move(row));
        }
    };

    const TemperingLadder ladder(is_single ? std::vector<double>{1.0} : opt.dpm_ladder);
    auto result = run(ctx, ladder, rc);

    FitOutput out;
    Matrix log_lik(static_cast<Eigen::Index>(ll_rows.size()), ctx.n_rows);
    for (std::size_t l = 0; l < ll_rows.size(); ++l)
        for (int i = 0; i < ctx.n_rows; ++i)
            log_lik(static_cast<Eigen::Index>(l), i) = ll_rows[l][static_cast<std::size_t>(i)];
    out.lpml_value = lpml(log_lik);
    out.draws = std::move(result.draws);
    if (collector) out.imputations = collector->draws();
    if (opt.n_replicates > 0 && ctx.p >= 2) {
        Rng ppc_rng(opt.seed, 900001);
        const Matrix ordered = data.cells.leftCols(ctx.p);
        const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask =
            data.mask.leftCols(ctx.p);
        out.tail = ppc_tail_checks(ordered, out.draws, ctx.p, ctx.q, kernel, opt.u_levels,
                                   opt.n_replicates, ppc_rng, &mask);
    }
    return out;
}

namespace detail {

// index-pulling worker pool; results land by index so the output order is
// independent of scheduling
template <typename Fn>
void parallel_for_index(int n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (int k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<int> next{0};
    const auto worker = [&] {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= n) return;
            fn(k);
        }
    };
    std::vector<std::future<void>> futs;
    for (int t = 1; t < threads; ++t) futs.push_back(std::async(std::launch::async, worker));
    worker();
    for (auto& f : futs) f.get();
}

}  // namespace detail

// ---------------------------------------------------------------- sim 1 ----

struct Sim1Options {
    bool t_data = false;
    int n_datasets = 20;
    int n_rows = 200;
    int n_iter = 10000;
    int burn_in = 5000;
    int draw_thin = 10;
    int n_replicates = 500;
    std::vector<double> ladder{0.005, 0.01, 0.05, 0.1, 0.5, 0.8, 1.1, 1.4, 1.7, 2.0};
    std::vector<ModelKind> models{ModelKind::single_gaussian, ModelKind::single_t,
                                  ModelKind::dpm_gaussian, ModelKind::dpm_t};
    std::uint64_t seed = 1;
    int threads = 1;
};

struct Sim1FitRecord {
    int dataset = 0;
    ModelKind model = ModelKind::dpm_gaussian;
    double lpml_value = 0.0;
    // upper-tail statistic per u level
    std::map<double, bool> covered;
    std::map<double, double> bayes_p;
};

struct Sim1Summary {
    ModelKind model;
    double lpml_mean = 0.0;
    double lpml_sd = 0.0;
    std::map<double, double> coverage_pct;
    std::map<double, double> p_value_mean;
};

struct Sim1Result {
    std::vector<Sim1FitRecord> fits;
    std::vector<Sim1Summary> summary;
    std::string fits_csv;
    std::string summary_csv;
};

inline Sim1Result run_sim1_experiment(const Sim1Options& opt) {
    const std::vector<double> u_levels = default_u_levels;
    std::vector<Dataset> datasets;
    datasets.reserve(static_cast<std::size_t>(opt.n_datasets));
    for (int ds = 0; ds < opt.n_datasets; ++ds) {
        Rng gen(opt.seed, 5000 + static_cast<std::uint64_t>(ds));
        datasets.push_back(dataset_from_matrix(sim1_schema(), gen_sim1(opt.t_data, opt.n_rows, gen)));
    }

    const int n_fits = opt.n_datasets * static_cast<int>(opt.models.size());
    std::vector<Sim1FitRecord> fits(static_cast<std::size_t>(n_fits));
    detail::parallel_for_index(n_fits, opt.threads, [&](int k) {
        const int ds = k / static_cast<int>(opt.models.size());
        const int mi = k % static_cast<int>(opt.models.size());
        FitOptions fo;
        fo.model = opt.models[static_cast<std::size_t>(mi)];
        fo.dpm_ladder = opt.ladder;
        fo.n_iter = opt.n_iter;
        fo.burn_in = opt.burn_in;
        fo.draw_thin = opt.draw_thin;
        fo.n_replicates = opt.n_replicates;
        fo.u_levels = u_levels;
        fo.seed = opt.seed + 7919 * static_cast<std::uint64_t>(ds + 1) +
                  131 * static_cast<std::uint64_t>(mi + 1);
        const auto out = fit_model(datasets[static_cast<std::size_t>(ds)], fo);
        Sim1FitRecord rec;
        rec.dataset = ds;
        rec.model = fo.model;
        rec.lpml_value = out.lpml_value;
        for (const auto& t : out.tail) {
            if (t.side != TailSide::upper) continue;
            rec.covered[t.u] = t.covered;
            rec.bayes_p[t.u] = t.bayes_p;
        }
        fits[static_cast<std::size_t>(k)] = std::move(rec);
    });

    Sim1Result result;
    result.fits = fits;
    for (ModelKind model : opt.models) {
        Sim1Summary s;
        s.model = model;
        std::vector<double> lpmls;
        for (const auto& rec : fits) {
            if (rec.model != model) continue;
            lpmls.push_back(rec.lpml_value);
            for (const auto& [u, cov] : rec.covered) s.coverage_pct[u] += cov ? 1.0 : 0.0;
            for (const auto& [u, pv] : rec.bayes_p) s.p_value_mean[u] += pv;
        }
        const double n = static_cast<double>(lpmls.size());
        for (auto& [u, v] : s.coverage_pct) v = 100.0 * v / n;
        for (auto& [u, v] : s.p_value_mean) v /= n;
        double mean = 0.0;
        for (double v : lpmls) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : lpmls) var += (v - mean) * (v - mean);
        s.lpml_mean = mean;
        s.lpml_sd = lpmls.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
        result.summary.push_back(std::move(s));
    }

    std::ostringstream fits_csv;
    fits_csv << "dataset,model,lpml";
    for (double u : u_levels) fits_csv << ",covered_u" << format_double(u) << ",p_u" << format_double(u);
    fits_csv << "\n";
    for (const auto& rec : fits) {
        fits_csv << rec.dataset << "," << model_name(rec.model) << ","
                 << format_double(rec.lpml_value);
        for (double u : u_levels)
            fits_csv << "," << (rec.covered.at(u) ? 1 : 0) << ","
                     << format_double(rec.bayes_p.at(u));
        fits_csv << "\n";
    }
    result.fits_csv = fits_csv.str();

    std::ostringstream sum_csv;
    sum_csv << "model,metric,u,value\n";
    for (const auto& s : result.summary) {
        for (double u : u_levels) {
            sum_csv << model_name(s.model) << ",coverage_pct," << format_double(u) << ","
                    << format_double(s.coverage_pct.at(u)) << "\n";
            sum_csv << model_name(s.model) << ",p_value_mean," << format_double(u) << ","
                    << format_double(s.p_value_mean.at(u)) << "\n";
        }
        sum_csv << model_name(s.model) << ",lpml_mean,," << format_double(s.lpml_mean) << "\n";
        sum_csv << model_name(s.model) << ",lpml_sd,," << format_double(s.lpml_sd) << "\n";
    }
    result.summary_csv = sum_csv.str();
    return result;
}

// ---------------------------------------------------------------- sim 2 ----

struct Sim2Options {
    int n_datasets = 10;
    int n_rows = 200;
    int n_iter = 10000;
    int burn_in = 5000;
    int draw_thin = 10;
    int m_imputations = 10;
    double gamma = mar_gamma_10;
    std::vector<double> ladder{1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5};
    std::vector<ModelKind> models{ModelKind::single_gaussian, ModelKind::dpm_gaussian};
    std::uint64_t seed = 1;
    int threads = 1;
};

struct Sim2FitRecord {
    int dataset = 0;
    ModelKind model = ModelKind::dpm_gaussian;
    double y1_misclass = 0.0;
    double y2_distance = 0.0;
    double y4_misclass = 0.0;
    std::vector<PooledEstimate> pooled;  // per Poisson coefficient
    std::vector<bool> covered;           // pooled 95% CI contains the complete-data fit
    std::vector<double> sq_bias;
};

struct Sim2Summary {
    ModelKind model;
    double y1_misclass_mean = 0.0, y1_misclass_sd = 0.0;
    double y2_distance_mean = 0.0, y2_distance_sd = 0.0;
    double y4_misclass_mean = 0.0, y4_misclass_sd = 0.0;
    std::vector<std::string> coef_names;
    std::vector<double> coverage_pct;  // per coefficient
    std::vector<double> sq_bias_mean;
};

struct Sim2Result {
    std::vector<Sim2FitRecord> fits;
    std::vector<Sim2Summary> summary;
    std::vector<std::string> coef_names;
    std::string accuracy_csv;
    std::string pooled_csv;
    std::string estimates_csv;  // per-dataset Rubin-pooled rows
};

inline Sim2Result run_sim2_experiment(const Sim2Options& opt) {
    struct DatasetBundle {
        Dataset truth;
        Dataset masked;
        Vector truth_coef;
    };
    const std::vector<std::string> predictors{"y2", "y3", "y4"};
    std::vector<DatasetBundle> bundles;
    std::vector<std::string> coef_names;
    for (int ds = 0; ds < opt.n_datasets; ++ds) {
        Rng gen(opt.seed, 6000 + static_cast<std::uint64_t>(ds));
        DatasetBundle b;
        b.truth = gen_sim2(opt.n_rows, gen);
        Rng mar(opt.seed, 7000 + static_cast<std::uint64_t>(ds));
        b.masked = apply_mar(b.truth, opt.gamma, mar);
        const auto fit = fit_poisson_glm(b.truth.cells, b.truth.schema, "y1", predictors);
        b.truth_coef = fit.coef;
        if (coef_names.empty()) coef_names = fit.names;
        bundles.push_back(std::move(b));
    }

    const int n_fits = opt.n_datasets * static_cast<int>(opt.models.size());
    std::vector<Sim2FitRecord> fits(static_cast<std::size_t>(n_fits));
    detail::parallel_for_index(n_fits, opt.threads, [&](int k) {
        const int ds = k / static_cast<int>(opt.models.size());
        const int mi = k % static_cast<int>(opt.models.size());
        const auto& bundle = bundles[static_cast<std::size_t>(ds)];
        FitOptions fo;
        fo.model = opt.models[static_cast<std::size_t>(mi)];
        fo.dpm_ladder = opt.ladder;
        fo.n_iter = opt.n_iter;
        fo.burn_in = opt.burn_in;
        fo.draw_thin = opt.draw_thin;
        fo.m_imputations = opt.m_imputations;
        fo.seed = opt.seed + 104729 * static_cast<std::uint64_t>(ds + 1) +
                  131 * static_cast<std::uint64_t>(mi + 1);
        const auto out = fit_model(bundle.masked, fo);

        Sim2FitRecord rec;
        rec.dataset = ds;
        rec.model = fo.model;
        // metric per column: misclassification for the discrete y1/y4,
        // Euclidean distance for the continuous y2 (y3 has no missingness)
        const std::vector<bool> discrete{true, false, false, true};
        const auto acc =
            imputation_accuracy(bundle.truth, bundle.masked.mask, out.imputations, discrete);
        rec.y1_misclass = acc[0].value;
        rec.y2_distance = acc[1].value;
        rec.y4_misclass = acc[3].value;

        const int n_coef = static_cast<int>(bundle.truth_coef.size());
        std::vector<std::vector<double>> est(static_cast<std::size_t>(n_coef)),
            var(static_cast<std::size_t>(n_coef));
        for (const auto& imp : out.imputations) {
            const auto fit = fit_poisson_glm(imp.values, bundle.truth.schema, "y1", predictors);
            for (int c = 0; c < n_coef; ++c) {
                est[static_cast<std::size_t>(c)].push_back(fit.coef(c));
                var[static_cast<std::size_t>(c)].push_back(fit.variance(c));
            }
        }
        for (int c = 0; c < n_coef; ++c) {
            const auto pooled =
                rubin_pool(est[static_cast<std::size_t>(c)], var[static_cast<std::size_t>(c)]);
            const double truth_c = bundle.truth_coef(c);
            rec.pooled.push_back(pooled);
            rec.covered.push_back(truth_c >= pooled.ci_lo && truth_c <= pooled.ci_hi);
            rec.sq_bias.push_back((pooled.point - truth_c) * (pooled.point - truth_c));
        }
        fits[static_cast<std::size_t>(k)] = std::move(rec);
    });

    Sim2Result result;
    result.fits = fits;
    result.coef_names = coef_names;
    for (ModelKind model : opt.models) {
        Sim2Summary s;
        s.model = model;
        s.coef_names = coef_names;
        std::vector<double> y1, y2, y4;
        s.coverage_pct.assign(coef_names.size(), 0.0);
        s.sq_bias_mean.assign(coef_names.size(), 0.0);
        int n = 0;
        for (const auto& rec : fits) {
            if (rec.model != model) continue;
            ++n;
            y1.push_back(rec.y1_misclass);
            y2.push_back(rec.y2_distance);
            y4.push_back(rec.y4_misclass);
            for (std::size_t c = 0; c < coef_names.size(); ++c) {
                s.coverage_pct[c] += rec.covered[c] ? 1.0 : 0.0;
                s.sq_bias_mean[c] += rec.sq_bias[c];
            }
        }
        const auto mean_sd = [](const std::vector<double>& xs, double& mean, double& sd) {
            mean = 0.0;
            for (double x : xs) mean += x;
            mean /= static_cast<double>(xs.size());
            double var = 0.0;
            for (double x : xs) var += (x - mean) * (x - mean);
            sd = xs.size() > 1 ? std::sqrt(var / (static_cast<double>(xs.size()) - 1.0)) : 0.0;
        };
        mean_sd(y1, s.y1_misclass_mean, s.y1_misclass_sd);
        mean_sd(y2, s.y2_distance_mean, s.y2_distance_sd);
        mean_sd(y4, s.y4_misclass_mean, s.y4_misclass_sd);
        for (std::size_t c = 0; c < coef_names.size(); ++c) {
            s.coverage_pct[c] = 100.0 * s.coverage_pct[c] / n;
            s.sq_bias_mean[c] /= n;
        }
        result.summary.push_back(std::move(s));
    }

    std::ostringstream acc_csv;
    acc_csv << "model,variable,metric,mean,sd\n";
    for (const auto& s : result.summary) {
        acc_csv << model_name(s.model) << ",y1,misclassification,"
                << format_double(s.y1_misclass_mean) << "," << format_double(s.y1_misclass_sd)
                << "\n";
        acc_csv << model_name(s.model) << ",y2,euclidean_distance,"
                << format_double(s.y2_distance_mean) << "," << format_double(s.y2_distance_sd)
                << "\n";
        acc_csv << model_name(s.model) << ",y4,misclassification,"
                << format_double(s.y4_misclass_mean) << "," << format_double(s.y4_misclass_sd)
                << "\n";
    }
    result.accuracy_csv = acc_csv.str();

    std::ostringstream pooled_csv;
    pooled_csv << "model,coefficient,coverage_pct,sq_bias_mean\n";
    for (const auto& s : result.summary)
        for (std::size_t c = 0; c < coef_names.size(); ++c)
            pooled_csv << model_name(s.model) << "," << coef_names[c] << ","
                       << format_double(s.coverage_pct[c]) << ","
                       << format_double(s.sq_bias_mean[c]) << "\n";
    result.pooled_csv = pooled_csv.str();

    std::ostringstream est_csv;
    est_csv << "dataset,model,parameter,point,total_sd,ci_lo,ci_hi\n";
    for (const auto& rec : fits)
        for (std::size_t c = 0; c < coef_names.size(); ++c) {
            const auto& p = rec.pooled[c];
            est_csv << rec.dataset << "," << model_name(rec.model) << "," << coef_names[c] << ","
                    << format_double(p.point) << "," << format_double(std::sqrt(p.total_var))
                    << "," << format_double(p.ci_lo) << "," << format_double(p.ci_hi) << "\n";
        }
    result.estimates_csv = est_csv.str();
    return result;
}

// ------------------------------------------------------------------ toy ----

struct ToyOptions {
    int n_seeds = 5;
    int n_rows = 200;
    int n_iter = 10000;
    std::vector<double> ladder{0.005, 0.01, 0.05, 0.1};
    std::uint64_t seed = 1;
    int threads = 1;
};

// Tracks which basin the first component's mean occupies; a change of basin
// between classified sweeps is one label switch. The first sweeps are
// excluded: the overfitted start has no settled labeling to switch from.
class LabelSwitchCounter {
public:
    LabelSwitchCounter(int n_rows, int settle_sweeps)
        : n_rows_(n_rows), settle_(settle_sweeps) {}

    void observe(int iteration, const ChainState& target) {
        if (iteration <= settle_) return;
        int occupancy = 0;
        for (int r : target.alloc) occupancy += (r == 0);
        if (occupancy < n_rows_ / 5) return;
        const Vector& beta = target.clusters[0].beta;
        Vector mode_a(2), mode_b(2);
        mode_a << -1.0, 3.0;
        mode_b << 2.0, 1.0;
        int basin = 0;
        if ((beta - mode_a).norm() < 1.5)
            basin = 1;
        else if ((beta - mode_b).norm() < 1.5)
            basin = 2;
        if (basin == 0) return;
        if (last_basin_ != 0 && basin != last_basin_) ++switches_;
        last_basin_ = basin;
    }

    int switches() const { return switches_; }

private:
    int n_rows_;
    int settle_;
    int last_basin_ = 0;
    int switches_ = 0;
};

struct ToySeedResult {
    std::uint64_t seed = 0;
    int tempered_switches = 0;
    int single_switches = 0;
};

struct ToyResult {
    std::vector<ToySeedResult> seeds;
    std::string csv;
};

inline ToyResult run_toy_experiment(const ToyOptions& opt) {
    std::vector<ToySeedResult> rows(static_cast<std::size_t>(opt.n_seeds));
    detail::parallel_for_index(opt.n_seeds, opt.threads, [&](int k) {
        const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(k);
        Rng gen(seed, 4000);
        const Matrix pts = gen_toy_two_modes(opt.n_rows, gen);
        const ModelContext ctx = ModelContext::raw(pts, Hyperparams::defaults(0, 2));

        const auto count_switches = [&](const std::vector<double>& ladder) {
            LabelSwitchCounter counter(opt.n_rows, opt.n_iter / 20);
            RunControl rc;
            rc.n_iter = opt.n_iter;
            rc.burn_in = opt.n_iter - 1;
            rc.draw_thin = 1;
            rc.seed = seed;
            rc.record_traces = false;
            rc.observer = [&](int iter, const std::vector<ChainState>& chains) {
                counter.observe(iter, chains.front());
            };
            run(ctx, TemperingLadder(ladder), rc);
            return counter.switches();
        };
        ToySeedResult r;
        r.seed = seed;
        r.tempered_switches = count_switches(opt.ladder);
        r.single_switches = count_switches({opt.ladder.front()});
        rows[static_cast<std::size_t>(k)] = r;
    });

    ToyResult result;
    result.seeds = rows;
    std::ostringstream csv;
    csv << "seed,tempered_switches,single_chain_switches\n";
    for (const auto& r : rows)
        csv << r.seed << "," << r.tempered_switches << "," << r.single_switches << "\n";
    result.csv = csv.str();
    return result;
}

}  // namespace copmix
