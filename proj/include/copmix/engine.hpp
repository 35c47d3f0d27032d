#pragma once

#include <filesystem>
#include <vector>

#include "copmix/config.hpp"
#include "copmix/imputation.hpp"

namespace copmix {

inline const std::vector<double> default_u_levels{0.95, 0.9, 0.85};

struct ImputeArtifacts {
    std::vector<ImputedDraw> imputations;
    std::vector<PosteriorDraw> draws;
    DiagnosticsReport report;
    SwapStats swaps;
};

// Full batch pipeline: ingest, tempered sampling, imputation snapshots,
// diagnostics, and on-disk artifacts under the configured output directory.
inline ImputeArtifacts run_impute(const RunConfig& config) {
    config.validate();
    namespace fs = std::filesystem;

    Schema schema = load_schema(read_text_file(config.schema_path));
    if (!config.group_column.empty()) schema.group_column = config.group_column;
    schema.validate();
    const Dataset data = load_dataset(read_text_file(config.data_path), schema);
    const Kernel kernel = config.kernel == "t" ? Kernel::student_t : Kernel::gaussian;
    const ModelContext ctx =
        ModelContext::from_dataset(data, kernel, config.hyperparams(schema.p(), schema.q()));

    RunControl rc;
    rc.n_iter = config.n_iter;
    rc.burn_in = config.burn_in;
    rc.draw_thin = config.draw_thin;
    rc.seed = config.seed;
    rc.n_threads = config.threads;
    rc.single_component = config.single_copula;

    ImputationCollector collector(config.n_iter, config.burn_in, config.m_imputations);
    std::vector<int> ll_iters;
    std::vector<std::vector<double>> ll_rows;
    rc.observer = [&](int iter, const std::vector<ChainState>& chains) {
        const ChainState& target = chains.front();
        collector.observe(iter, target);
        // CPO terms at the same thinned iterations as the stored draws
        if (iter > config.burn_in && (iter - config.burn_in) % config.draw_thin == 0) {
            std::vector<double> row(static_cast<std::size_t>(ctx.n_rows));
            for (int i = 0; i < ctx.n_rows; ++i)
                row[static_cast<std::size_t>(i)] = copula_row_logdensity(target, i);
            ll_iters.push_back(iter);
            ll_rows.push_back(std::move(row));
        }
    };

    const auto result = run(ctx, TemperingLadder(config.ladder), rc);

    Matrix log_lik(static_cast<Eigen::Index>(ll_rows.size()), ctx.n_rows);
    for (std::size_t l = 0; l < ll_rows.size(); ++l)
        for (int i = 0; i < ctx.n_rows; ++i)
            log_lik(static_cast<Eigen::Index>(l), i) = ll_rows[l][static_cast<std::size_t>(i)];

    ImputeArtifacts art;
    art.imputations = collector.draws();
    art.draws = result.draws;
    art.swaps = result.swaps;
    art.report.lpml_value = lpml(log_lik);
    if (ctx.p >= 2) {
        Rng ppc_rng(config.seed, 900001);
        const Matrix ordered = data.cells.leftCols(ctx.p);
        const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask =
            data.mask.leftCols(ctx.p);
        art.report.tail =
            ppc_tail_checks(ordered, result.draws, ctx.p, ctx.q, kernel, default_u_levels,
                            config.n_replicates, ppc_rng, &mask);
    }

    const fs::path out(config.out_dir);
    fs::create_directories(out);
    for (std::size_t k = 0; k < art.imputations.size(); ++k)
        write_text_file(out / ("imputed_" + std::to_string(k + 1) + ".csv"),
                        completed_csv(data, art.imputations[k].values));
    write_text_file(out / "draws.csv", draws_csv(art.draws, ctx.p, ctx.q));
    write_text_file(out / "cpo_loglik.csv", loglik_csv(ll_iters, log_lik));
    write_text_file(out / "trace.csv", traces_csv(result.traces));
    write_text_file(out / "swap_stats.csv", swap_stats_csv(result.swaps));
    write_text_file(out / "diagnostics.csv", diagnostics_csv(art.report));
    write_text_file(out / "manifest.txt", manifest_text(config));
    return art;
}

// Recompute the diagnostics report of a finished run from its stored draws
// and per-draw likelihood terms.
inline DiagnosticsReport diagnose_run(const std::string& run_dir, const std::string& data_path,
                                      const std::string& schema_path, const std::string& out_dir,
                                      const std::string& kernel_name = "gaussian",
                                      int n_replicates = 500, std::uint64_t seed = 1) {
    namespace fs = std::filesystem;
    const Schema schema = load_schema(read_text_file(schema_path));
    const Dataset data = load_dataset(read_text_file(data_path), schema);
    const Kernel kernel = kernel_name == "t" ? Kernel::student_t : Kernel::gaussian;
    const int p = schema.p(), q = schema.q();

    const auto draws =
        parse_draws_csv(read_text_file(fs::path(run_dir) / "draws.csv"), p, q);
    const Matrix log_lik = parse_loglik_csv(read_text_file(fs::path(run_dir) / "cpo_loglik.csv"));
    require(log_lik.cols() == data.n_rows(), "config_invalid",
            "stored likelihood terms do not match the dataset");

    DiagnosticsReport report;
    report.lpml_value = lpml(log_lik);
    if (p >= 2) {
        Rng ppc_rng(seed, 900001);
        const Matrix ordered = data.cells.leftCols(p);
        const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask = data.mask.leftCols(p);
        report.tail = ppc_tail_checks(ordered, draws, p, q, kernel, default_u_levels,
                                      n_replicates, ppc_rng, &mask);
    }
    fs::create_directories(out_dir);
    write_text_file(fs::path(out_dir) / "diagnostics.csv", diagnostics_csv(report));
    return report;
}

}  // namespace copmix
