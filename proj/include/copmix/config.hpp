#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "copmix/io.hpp"

namespace copmix {

inline constexpr const char* version_string = "0.1.0";

// Flat key=value run configuration. Every key has a default, so a run needs
// only data, schema and out. The manifest written by a run is itself a valid
// config that reproduces the run.
struct RunConfig {
    std::string data_path;
    std::string schema_path;
    std::string out_dir;
    std::string kernel = "gaussian";  // gaussian | t
    std::vector<double> ladder = {1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5};
    int n_iter = 10000;
    int burn_in = 5000;
    int m_imputations = 10;
    std::uint64_t seed = 1;
    int draw_thin = 10;
    int n_replicates = 500;
    int threads = 1;
    bool single_copula = false;
    std::string group_column;  // optional override of the schema's group key
    // hyperparameter overrides (scales applied to the identity defaults)
    double nu_sigma = 0.0;  // 0 = default max(Q+2, p+Q)
    double lambda_sigma_scale = 1.0;
    double lambda_beta_scale = 1.0;
    double mu_beta = 0.0;
    double nu_psi = 0.0;  // 0 = default p+Q+2
    double lambda_psi_scale = 1.0;

    void validate() const {
        require(!data_path.empty(), "config_invalid", "data path is required");
        require(!schema_path.empty(), "config_invalid", "schema path is required");
        require(!out_dir.empty(), "config_invalid", "output directory is required");
        require(kernel == "gaussian" || kernel == "t", "config_invalid",
                "kernel must be gaussian or t");
        require(n_iter >= 1, "config_invalid", "n_iter must be positive");
        require(burn_in >= 0 && burn_in < n_iter, "config_invalid",
                "burn_in must be smaller than n_iter");
        require(m_imputations >= 1 && m_imputations <= n_iter - burn_in, "config_invalid",
                "m must lie in 1..(n_iter - burn_in)");
        require(draw_thin >= 1, "config_invalid", "thin must be positive");
        require(n_replicates >= 1, "config_invalid", "n_replicates must be positive");
        require(threads >= 1, "config_invalid", "threads must be positive");
        require(lambda_sigma_scale > 0.0 && lambda_beta_scale > 0.0 && lambda_psi_scale > 0.0,
                "config_invalid", "hyperparameter scales must be positive");
        const TemperingLadder checked(ladder);  // strictly increasing, positive
        (void)checked;
        if (single_copula)
            require(ladder.size() == 1, "config_invalid",
                    "single_copula runs use a ladder of length 1");
    }

    Hyperparams hyperparams(int p, int q) const {
        auto h = Hyperparams::defaults(p, q);
        h.mu_beta.setConstant(mu_beta);
        h.lambda_beta *= lambda_beta_scale;
        h.lambda_sigma *= lambda_sigma_scale;
        h.lambda_psi *= lambda_psi_scale;
        if (nu_sigma > 0.0) h.nu_sigma = nu_sigma;
        if (nu_psi > 0.0) h.nu_psi = nu_psi;
        return h;
    }
};

inline std::vector<double> parse_ladder(const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ','))
        out.push_back(detail::parse_number(detail::trim(part), "ladder"));
    require(!out.empty(), "config_invalid", "empty ladder");
    return out;
}

inline RunConfig config_from_kv(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    const auto num = [&](const std::string& key, double fallback) {
        const auto it = kv.find(key);
        return it == kv.end() ? fallback : detail::parse_number(it->second, "config key " + key);
    };
    const auto str = [&](const std::string& key, const std::string& fallback) {
        const auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    };
    for (const auto& [key, value] : kv) {
        static const std::set<std::string> known{
            "data",       "schema",       "out",        "kernel",        "ladder",
            "n_iter",     "burn_in",      "m",          "seed",          "thin",
            "n_replicates", "threads",    "single_copula", "group",      "nu_sigma",
            "lambda_sigma_scale", "lambda_beta_scale", "mu_beta", "nu_psi",
            "lambda_psi_scale", "version"};
        require(known.count(key) == 1, "config_invalid", "unknown config key '" + key + "'");
        (void)value;
    }
    c.data_path = str("data", "");
    c.schema_path = str("schema", "");
    c.out_dir = str("out", "");
    c.kernel = str("kernel", c.kernel);
    if (kv.count("ladder")) c.ladder = parse_ladder(kv.at("ladder"));
    c.n_iter = static_cast<int>(num("n_iter", c.n_iter));
    c.burn_in = static_cast<int>(num("burn_in", c.burn_in));
    c.m_imputations = static_cast<int>(num("m", c.m_imputations));
    c.seed = static_cast<std::uint64_t>(num("seed", static_cast<double>(c.seed)));
    c.draw_thin = static_cast<int>(num("thin", c.draw_thin));
    c.n_replicates = static_cast<int>(num("n_replicates", c.n_replicates));
    c.threads = static_cast<int>(num("threads", c.threads));
    c.single_copula = num("single_copula", 0.0) != 0.0;
    c.group_column = str("group", "");
    c.nu_sigma = num("nu_sigma", 0.0);
    c.lambda_sigma_scale = num("lambda_sigma_scale", 1.0);
    c.lambda_beta_scale = num("lambda_beta_scale", 1.0);
    c.mu_beta = num("mu_beta", 0.0);
    c.nu_psi = num("nu_psi", 0.0);
    c.lambda_psi_scale = num("lambda_psi_scale", 1.0);
    return c;
}

inline std::string manifest_text(const RunConfig& c) {
    std::ostringstream out;
    out << "version=" << version_string << "\n";
    out << "data=" << c.data_path << "\n";
    out << "schema=" << c.schema_path << "\n";
    out << "out=" << c.out_dir << "\n";
    out << "kernel=" << c.kernel << "\n";
    out << "ladder=";
    for (std::size_t k = 0; k < c.ladder.size(); ++k)
        out << (k ? "," : "") << format_double(c.ladder[k]);
    out << "\n";
    out << "n_iter=" << c.n_iter << "\n";
    out << "burn_in=" << c.burn_in << "\n";
    out << "m=" << c.m_imputations << "\n";
    out << "seed=" << c.seed << "\n";
    out << "thin=" << c.draw_thin << "\n";
    out << "n_replicates=" << c.n_replicates << "\n";
    out << "threads=" << c.threads << "\n";
    out << "single_copula=" << (c.single_copula ? 1 : 0) << "\n";
    if (!c.group_column.empty()) out << "group=" << c.group_column << "\n";
    out << "nu_sigma=" << format_double(c.nu_sigma) << "\n";
    out << "lambda_sigma_scale=" << format_double(c.lambda_sigma_scale) << "\n";
    out << "lambda_beta_scale=" << format_double(c.lambda_beta_scale) << "\n";
    out << "mu_beta=" << format_double(c.mu_beta) << "\n";
    out << "nu_psi=" << format_double(c.nu_psi) << "\n";
    out << "lambda_psi_scale=" << format_double(c.lambda_psi_scale) << "\n";
    return out.str();
}

}  // namespace copmix
