// Batch front end: ingestion -> tempered sampling -> imputation ->
// diagnostics, plus the simulation designs and experiment tables.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "copmix/engine.hpp"
#include "copmix/experiments.hpp"

namespace fs = std::filesystem;
using namespace copmix;

namespace {

struct ImputeFlags {
    std::string config_file;
    std::map<std::string, std::string> overrides;
};

void add_override_option(CLI::App* cmd, ImputeFlags& flags, const std::string& flag,
                         const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&flags, key](const std::string& v) { flags.overrides[key] = v; }, help);
}

int run_impute_cmd(const ImputeFlags& flags) {
    std::map<std::string, std::string> kv;
    if (!flags.config_file.empty()) kv = parse_key_values(read_text_file(flags.config_file));
    for (const auto& [k, v] : flags.overrides) kv[k] = v;
    const RunConfig config = config_from_kv(kv);
    const auto art = run_impute(config);
    std::cout << "wrote " << art.imputations.size() << " imputed datasets, "
              << art.draws.size() << " posterior draws to " << config.out_dir << "\n";
    std::cout << "lpml=" << format_double(art.report.lpml_value) << "\n";
    for (std::size_t k = 0; k < art.swaps.attempts.size(); ++k)
        if (art.swaps.attempts[k] > 0 && art.swaps.accepts[k] == 0)
            std::cout << "warning: no accepted swaps between chains " << (k + 1) << " and "
                      << (k + 2) << "; the ladder may have a gap there\n";
    return 0;
}

int run_simulate_cmd(const std::string& design_name, int n_rows, std::uint64_t seed,
                     double gamma, const std::string& out_dir) {
    const SimDesign design = parse_design(design_name);
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    Rng gen(seed, 4000);
    switch (design) {
        case SimDesign::sim1_gaussian:
        case SimDesign::sim1_t: {
            const auto data = dataset_from_matrix(
                sim1_schema(), gen_sim1(design == SimDesign::sim1_t, n_rows, gen));
            write_text_file(out / "truth.csv", dataset_csv(data));
            write_text_file(out / "schema.txt", schema_text(data.schema));
            break;
        }
        case SimDesign::sim2_mixed: {
            const auto truth = gen_sim2(n_rows, gen);
            Rng mar(seed, 4001);
            const auto masked = apply_mar(truth, gamma, mar);
            write_text_file(out / "truth.csv", dataset_csv(truth));
            write_text_file(out / "masked.csv", dataset_csv(masked));
            write_text_file(out / "schema.txt", schema_text(truth.schema));
            break;
        }
        case SimDesign::toy_two_modes: {
            const Matrix pts = gen_toy_two_modes(n_rows, gen);
            Schema schema;
            schema.columns = {{"x1", ColumnKind::continuous, 0},
                              {"x2", ColumnKind::continuous, 0}};
            write_text_file(out / "truth.csv", dataset_csv(dataset_from_matrix(schema, pts)));
            write_text_file(out / "schema.txt", schema_text(schema));
            break;
        }
    }
    std::cout << "wrote " << design_name << " dataset (n=" << n_rows << ") to " << out_dir
              << "\n";
    return 0;
}

std::vector<ModelKind> parse_models(const std::string& csv) {
    std::vector<ModelKind> out;
    std::istringstream in(csv);
    std::string part;
    while (std::getline(in, part, ',')) out.push_back(parse_model(detail::trim(part)));
    require(!out.empty(), "config_invalid", "no models given");
    return out;
}

int run_experiment_cmd(const std::string& design_name, int n_datasets, int n_rows, int n_iter,
                       int burn_in, int m, double gamma, const std::string& models_csv,
                       int n_replicates, std::uint64_t seed, int threads,
                       const std::string& out_dir) {
    const SimDesign design = parse_design(design_name);
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    switch (design) {
        case SimDesign::sim1_gaussian:
        case SimDesign::sim1_t: {
            Sim1Options opt;
            opt.t_data = design == SimDesign::sim1_t;
            opt.n_datasets = n_datasets;
            opt.n_rows = n_rows;
            opt.n_iter = n_iter;
            opt.burn_in = burn_in;
            opt.n_replicates = n_replicates;
            opt.seed = seed;
            opt.threads = threads;
            if (!models_csv.empty()) opt.models = parse_models(models_csv);
            const auto res = run_sim1_experiment(opt);
            write_text_file(out / "sim1_fits.csv", res.fits_csv);
            write_text_file(out / "sim1_summary.csv", res.summary_csv);
            for (const auto& s : res.summary)
                std::cout << model_name(s.model) << ": lpml " << s.lpml_mean << " (sd "
                          << s.lpml_sd << "), coverage(u=0.9) " << s.coverage_pct.at(0.9)
                          << "%\n";
            break;
        }
        case SimDesign::sim2_mixed: {
            Sim2Options opt;
            opt.n_datasets = n_datasets;
            opt.n_rows = n_rows;
            opt.n_iter = n_iter;
            opt.burn_in = burn_in;
            opt.m_imputations = m;
            opt.gamma = gamma;
            opt.seed = seed;
            opt.threads = threads;
            if (!models_csv.empty()) opt.models = parse_models(models_csv);
            const auto res = run_sim2_experiment(opt);
            write_text_file(out / "sim2_accuracy.csv", res.accuracy_csv);
            write_text_file(out / "sim2_pooled.csv", res.pooled_csv);
            write_text_file(out / "sim2_estimates.csv", res.estimates_csv);
            for (const auto& s : res.summary)
                std::cout << model_name(s.model) << ": y2 distance " << s.y2_distance_mean
                          << ", y1 misclass " << s.y1_misclass_mean << ", y4 misclass "
                          << s.y4_misclass_mean << "\n";
            break;
        }
        case SimDesign::toy_two_modes: {
            ToyOptions opt;
            opt.n_seeds = n_datasets;
            opt.n_rows = n_rows;
            opt.n_iter = n_iter;
            opt.seed = seed;
            opt.threads = threads;
            const auto res = run_toy_experiment(opt);
            write_text_file(out / "toy_switches.csv", res.csv);
            for (const auto& r : res.seeds)
                std::cout << "seed " << r.seed << ": tempered " << r.tempered_switches
                          << " switches, single chain " << r.single_switches << "\n";
            break;
        }
    }
    std::cout << "experiment outputs in " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DPM copula imputation engine"};
    app.require_subcommand(1);

    // impute
    auto* impute = app.add_subcommand("impute", "run the imputation pipeline on a dataset");
    ImputeFlags flags;
    impute->add_option("--config", flags.config_file, "key=value config file (e.g. a manifest)");
    add_override_option(impute, flags, "--data", "data", "input CSV");
    add_override_option(impute, flags, "--schema", "schema", "schema file");
    add_override_option(impute, flags, "--out", "out", "output directory");
    add_override_option(impute, flags, "--kernel", "kernel", "gaussian|t");
    add_override_option(impute, flags, "--ladder", "ladder", "comma-separated total masses");
    add_override_option(impute, flags, "--n-iter", "n_iter", "sweeps");
    add_override_option(impute, flags, "--burn-in", "burn_in", "burn-in sweeps");
    add_override_option(impute, flags, "--m", "m", "number of imputed datasets");
    add_override_option(impute, flags, "--seed", "seed", "master seed");
    add_override_option(impute, flags, "--thin", "thin", "draw thinning");
    add_override_option(impute, flags, "--n-replicates", "n_replicates", "PPC replicates");
    add_override_option(impute, flags, "--threads", "threads", "worker threads");
    add_override_option(impute, flags, "--single-copula", "single_copula",
                        "1 = single-component mode");
    add_override_option(impute, flags, "--group", "group", "group column for random effects");
    add_override_option(impute, flags, "--nu-sigma", "nu_sigma", "Inverse-Wishart df override");
    add_override_option(impute, flags, "--lambda-sigma-scale", "lambda_sigma_scale",
                        "scale of the Sigma prior");
    add_override_option(impute, flags, "--lambda-beta-scale", "lambda_beta_scale",
                        "scale of the beta prior");
    add_override_option(impute, flags, "--mu-beta", "mu_beta", "beta prior mean");
    add_override_option(impute, flags, "--nu-psi", "nu_psi", "random-effects IW df");
    add_override_option(impute, flags, "--lambda-psi-scale", "lambda_psi_scale",
                        "scale of the Psi prior");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "write a simulated dataset");
    std::string sim_design = "sim2";
    int sim_rows = 200;
    std::uint64_t sim_seed = 1;
    double sim_gamma = mar_gamma_10;
    std::string sim_out;
    simulate->add_option("--design", sim_design, "sim1|sim1_t|sim2|toy");
    simulate->add_option("--n", sim_rows, "rows");
    simulate->add_option("--seed", sim_seed, "seed");
    simulate->add_option("--gamma", sim_gamma, "MAR strength (sim2)");
    simulate->add_option("--out", sim_out, "output directory")->required();

    // experiment
    auto* experiment = app.add_subcommand("experiment", "run a simulation study");
    std::string exp_design = "sim1";
    int exp_datasets = 20, exp_rows = 200, exp_iter = 10000, exp_burn = 5000, exp_m = 10;
    int exp_replicates = 500, exp_threads = 1;
    double exp_gamma = mar_gamma_10;
    std::uint64_t exp_seed = 1;
    std::string exp_models, exp_out;
    experiment->add_option("--design", exp_design, "sim1|sim1_t|sim2|toy");
    experiment->add_option("--datasets", exp_datasets, "datasets (toy: seeds)");
    experiment->add_option("--rows", exp_rows, "rows per dataset");
    experiment->add_option("--n-iter", exp_iter, "sweeps per fit");
    experiment->add_option("--burn-in", exp_burn, "burn-in sweeps");
    experiment->add_option("--m", exp_m, "imputations per fit (sim2)");
    experiment->add_option("--gamma", exp_gamma, "MAR strength (sim2)");
    experiment->add_option("--models", exp_models, "comma-separated model list");
    experiment->add_option("--replicates", exp_replicates, "PPC replicates (sim1)");
    experiment->add_option("--seed", exp_seed, "base seed");
    experiment->add_option("--threads", exp_threads, "worker threads");
    experiment->add_option("--out", exp_out, "output directory")->required();

    // diagnose
    auto* diagnose = app.add_subcommand("diagnose", "recompute diagnostics from a stored run");
    std::string diag_run, diag_data, diag_schema, diag_out, diag_kernel = "gaussian";
    int diag_replicates = 500;
    std::uint64_t diag_seed = 1;
    diagnose->add_option("--run", diag_run, "directory of a finished run")->required();
    diagnose->add_option("--data", diag_data, "input CSV")->required();
    diagnose->add_option("--schema", diag_schema, "schema file")->required();
    diagnose->add_option("--out", diag_out, "output directory")->required();
    diagnose->add_option("--kernel", diag_kernel, "gaussian|t");
    diagnose->add_option("--replicates", diag_replicates, "PPC replicates");
    diagnose->add_option("--seed", diag_seed, "replication seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (impute->parsed()) return run_impute_cmd(flags);
        if (simulate->parsed())
            return run_simulate_cmd(sim_design, sim_rows, sim_seed, sim_gamma, sim_out);
        if (experiment->parsed())
            return run_experiment_cmd(exp_design, exp_datasets, exp_rows, exp_iter, exp_burn,
                                      exp_m, exp_gamma, exp_models, exp_replicates, exp_seed,
                                      exp_threads, exp_out);
        if (diagnose->parsed()) {
            const auto report = diagnose_run(diag_run, diag_data, diag_schema, diag_out,
                                             diag_kernel, diag_replicates, diag_seed);
            std::cout << "lpml=" << format_double(report.lpml_value) << "\n";
            return 0;
        }
    } catch (const copmix::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
