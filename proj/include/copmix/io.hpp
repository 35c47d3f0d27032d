#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "copmix/data.hpp"
#include "copmix/diagnostics.hpp"
#include "copmix/tempering.hpp"

namespace copmix {

// shortest round-trip decimal representation, so reruns are byte-identical
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_cell(double v, ColumnKind kind) {
    if (kind == ColumnKind::nominal) return std::to_string(static_cast<long long>(v));
    return format_double(v);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "io_error", "cannot open " + path.string() + " for writing");
    out << text;
    require(static_cast<bool>(out), "io_error", "failed writing " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "io_error", "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// completed dataset on the data scale; group labels ride along untouched
inline std::string completed_csv(const Dataset& data, const Matrix& values) {
    std::ostringstream out;
    for (int j = 0; j < data.schema.n_cols(); ++j)
        out << (j ? "," : "") << data.schema.columns[static_cast<std::size_t>(j)].name;
    if (!data.group.empty()) out << "," << data.schema.group_column;
    out << "\n";
    for (int i = 0; i < data.n_rows(); ++i) {
        for (int j = 0; j < data.schema.n_cols(); ++j)
            out << (j ? "," : "")
                << format_cell(values(i, j), data.schema.columns[static_cast<std::size_t>(j)].kind);
        if (!data.group.empty()) out << "," << data.group[static_cast<std::size_t>(i)];
        out << "\n";
    }
    return out.str();
}

inline std::string dataset_csv(const Dataset& data) {
    std::ostringstream out;
    for (int j = 0; j < data.schema.n_cols(); ++j)
        out << (j ? "," : "") << data.schema.columns[static_cast<std::size_t>(j)].name;
    if (!data.group.empty()) out << "," << data.schema.group_column;
    out << "\n";
    for (int i = 0; i < data.n_rows(); ++i) {
        for (int j = 0; j < data.schema.n_cols(); ++j) {
            out << (j ? "," : "");
            if (data.mask(i, j))
                out << "NA";
            else
                out << format_cell(data.cells(i, j),
                                   data.schema.columns[static_cast<std::size_t>(j)].kind);
        }
        if (!data.group.empty()) out << "," << data.group[static_cast<std::size_t>(i)];
        out << "\n";
    }
    return out.str();
}

inline std::string schema_text(const Schema& schema) {
    std::ostringstream out;
    for (const auto& c : schema.columns) {
        out << c.name << ",";
        switch (c.kind) {
            case ColumnKind::continuous: out << "continuous"; break;
            case ColumnKind::ordinal: out << "ordinal"; break;
            case ColumnKind::nominal: out << "nominal," << c.n_categories; break;
        }
        out << "\n";
    }
    if (!schema.group_column.empty()) out << "group=" << schema.group_column << "\n";
    return out.str();
}

// thinned posterior draws, one row per (draw, component)
inline std::string draws_csv(const std::vector<PosteriorDraw>& draws, int p, int q) {
    const int d = p + q;
    std::ostringstream out;
    out << "iteration,component,weight,nu";
    for (int k = 0; k < q; ++k) out << ",beta_" << k;
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) out << ",sigma_" << a << "_" << b;
    out << "\n";
    for (const auto& draw : draws) {
        for (std::size_t h = 0; h < draw.comps.size(); ++h) {
            const auto& c = draw.comps[h];
            out << draw.iteration << "," << h << "," << format_double(draw.weight[h]) << ","
                << format_double(c.nu);
            for (int k = 0; k < q; ++k) out << "," << format_double(c.beta(k));
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) out << "," << format_double(c.sigma(a, b));
            out << "\n";
        }
    }
    return out.str();
}

inline std::vector<PosteriorDraw> parse_draws_csv(const std::string& text, int p, int q) {
    const int d = p + q;
    std::istringstream in(text);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "csv_parse", "empty draws file");
    std::vector<PosteriorDraw> draws;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        require(static_cast<int>(cells.size()) == 4 + q + d * d, "csv_parse",
                "draws row has wrong column count");
        const int iteration = static_cast<int>(detail::parse_number(cells[0], "draws"));
        const int comp = static_cast<int>(detail::parse_number(cells[1], "draws"));
        if (draws.empty() || draws.back().iteration != iteration) {
            draws.push_back({});
            draws.back().iteration = iteration;
        }
        require(comp == static_cast<int>(draws.back().comps.size()), "csv_parse",
                "draws components out of order");
        draws.back().weight.push_back(detail::parse_number(cells[2], "draws"));
        ComponentDraw c;
        c.nu = detail::parse_number(cells[3], "draws");
        c.beta = Vector(q);
        for (int k = 0; k < q; ++k)
            c.beta(k) = detail::parse_number(cells[static_cast<std::size_t>(4 + k)], "draws");
        c.sigma = Matrix(d, d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                c.sigma(a, b) = detail::parse_number(
                    cells[static_cast<std::size_t>(4 + q + a * d + b)], "draws");
        draws.back().comps.push_back(std::move(c));
    }
    require(!draws.empty(), "csv_parse", "draws file has no rows");
    return draws;
}

// per-draw per-row log likelihoods backing LPML (rows: stored sweeps)
inline std::string loglik_csv(const std::vector<int>& iterations, const Matrix& log_lik) {
    std::ostringstream out;
    out << "iteration";
    for (Eigen::Index i = 0; i < log_lik.cols(); ++i) out << ",ll_" << (i + 1);
    out << "\n";
    for (Eigen::Index l = 0; l < log_lik.rows(); ++l) {
        out << iterations[static_cast<std::size_t>(l)];
        for (Eigen::Index i = 0; i < log_lik.cols(); ++i)
            out << "," << format_double(log_lik(l, i));
        out << "\n";
    }
    return out.str();
}

inline Matrix parse_loglik_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "csv_parse", "empty loglik file");
    const auto header = detail::split_csv_line(line);
    const int n = static_cast<int>(header.size()) - 1;
    require(n >= 1, "csv_parse", "loglik file without observation columns");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        require(static_cast<int>(cells.size()) == n + 1, "csv_parse", "ragged loglik row");
        std::vector<double> row(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            row[static_cast<std::size_t>(i)] =
                detail::parse_number(cells[static_cast<std::size_t>(i + 1)], "loglik");
        rows.push_back(std::move(row));
    }
    Matrix out(static_cast<Eigen::Index>(rows.size()), n);
    for (std::size_t l = 0; l < rows.size(); ++l)
        for (int i = 0; i < n; ++i) out(static_cast<Eigen::Index>(l), i) = rows[l][static_cast<std::size_t>(i)];
    return out;
}

inline std::string traces_csv(const std::vector<TraceRow>& traces) {
    std::ostringstream out;
    out << "iteration,chain,total_mass,occupied_clusters,loglik\n";
    for (const auto& t : traces)
        out << t.iteration << "," << t.chain << "," << format_double(t.total_mass) << ","
            << t.occupied << "," << format_double(t.loglik) << "\n";
    return out.str();
}

inline std::string swap_stats_csv(const SwapStats& swaps) {
    std::ostringstream out;
    out << "pair,attempts,accepts,rate\n";
    for (std::size_t k = 0; k < swaps.attempts.size(); ++k)
        out << (k + 1) << "," << swaps.attempts[k] << "," << swaps.accepts[k] << ","
            << format_double(swaps.rate(static_cast<int>(k))) << "\n";
    return out.str();
}

inline std::string diagnostics_csv(const DiagnosticsReport& report) {
    std::ostringstream out;
    out << "stat,col_a,col_b,u,side,observed,rep_mean,rep_lo,rep_hi,bayes_p,covered\n";
    out << "lpml,,,,," << format_double(report.lpml_value) << ",,,,,\n";
    for (const auto& t : report.tail) {
        out << "tail_dep," << t.col_a << "," << t.col_b << "," << format_double(t.u) << ","
            << (t.side == TailSide::upper ? "upper" : "lower") << ","
            << format_double(t.observed) << "," << format_double(t.rep_mean) << ","
            << format_double(t.rep_lo) << "," << format_double(t.rep_hi) << ","
            << format_double(t.bayes_p) << "," << (t.covered ? 1 : 0) << "\n";
    }
    return out.str();
}

// flat key=value text; '#' comments and blank lines are skipped
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, "config_invalid", "expected key=value, got '" + line + "'");
        const std::string key = detail::trim(line.substr(0, eq));
        require(!key.empty(), "config_invalid", "empty key in config line '" + line + "'");
        kv[key] = detail::trim(line.substr(eq + 1));
    }
    return kv;
}

}  // namespace copmix
