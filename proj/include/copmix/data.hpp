#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "copmix/common.hpp"
#include "copmix/special.hpp"

namespace copmix {

enum class ColumnKind { continuous, ordinal, nominal };

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    int n_categories = 0;  // nominal only; categories coded 0..n_categories-1
};

// Model layout: ordered (continuous/ordinal) columns first, at most one
// nominal column in the last position. The nominal variable with Q+1
// categories occupies Q latent coordinates.
struct Schema {
    std::vector<ColumnSchema> columns;
    std::string group_column;  // empty unless random effects are requested

    int n_cols() const { return static_cast<int>(columns.size()); }
    int p() const { return has_nominal() ? n_cols() - 1 : n_cols(); }
    int q() const { return has_nominal() ? columns.back().n_categories - 1 : 0; }
    bool has_nominal() const {
        return !columns.empty() && columns.back().kind == ColumnKind::nominal;
    }

    void validate() const {
        require(!columns.empty(), "schema_invalid", "schema has no columns");
        for (std::size_t j = 0; j < columns.size(); ++j) {
            const auto& c = columns[j];
            require(!c.name.empty(), "schema_invalid", "column with empty name");
            for (std::size_t k = j + 1; k < columns.size(); ++k)
                require(c.name != columns[k].name, "schema_invalid",
                        "duplicate column name '" + c.name + "'");
            if (c.kind == ColumnKind::nominal) {
                require(j + 1 == columns.size(), "schema_invalid",
                        "nominal column must be the last column");
                require(c.n_categories >= 2, "schema_invalid",
                        "nominal column needs at least 2 categories");
            } else {
                require(c.n_categories == 0, "schema_invalid",
                        "n_categories only applies to nominal columns");
            }
        }
        if (!group_column.empty())
            for (const auto& c : columns)
                require(c.name != group_column, "schema_invalid",
                        "group column must not be a model column");
    }
};

struct Dataset {
    Schema schema;
    Matrix cells;                               // N x n_cols, nominal stored as code
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;  // true = missing
    std::vector<int> group;                     // per row, empty unless grouped
    int n_groups = 0;

    int n_rows() const { return static_cast<int>(cells.rows()); }
    bool observed(int i, int j) const { return !mask(i, j); }
    bool any_missing() const { return mask.any(); }
};

// Empirical CDF of one column's observed values with the rank/(n+1) scaling,
// so the probit transform of any evaluation stays finite.
class EmpiricalCdf {
public:
    EmpiricalCdf() = default;
    explicit EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
        require(!sorted_.empty(), "domain", "empirical CDF of an empty column");
        std::sort(sorted_.begin(), sorted_.end());
    }

    int n_obs() const { return static_cast<int>(sorted_.size()); }

    // rank(y)/(n+1) with rank counting observed values <= y
    double eval(double y) const {
        const auto rank = std::upper_bound(sorted_.begin(), sorted_.end(), y) - sorted_.begin();
        return static_cast<double>(rank) / (sorted_.size() + 1.0);
    }

    // smallest observed value v with eval(v) >= u; the search reuses eval's
    // own arithmetic so inverse(eval(y)) lands back on y exactly
    double inverse(double u) const {
        std::size_t lo = 0, hi = sorted_.size() - 1;
        while (lo < hi) {
            const std::size_t mid = lo + (hi - lo) / 2;
            if (eval(sorted_[mid]) >= u)
                hi = mid;
            else
                lo = mid + 1;
        }
        return sorted_[lo];
    }

    double min() const { return sorted_.front(); }
    double max() const { return sorted_.back(); }
    const std::vector<double>& sorted_values() const { return sorted_; }

private:
    std::vector<double> sorted_;
};

inline EmpiricalCdf build_ecdf(const std::vector<double>& observed) {
    return EmpiricalCdf(observed);
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline bool is_missing_marker(const std::string& cell) { return cell.empty() || cell == "NA"; }

inline double parse_number(const std::string& cell, const std::string& where) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &pos);
    } catch (const std::exception&) {
        throw error("csv_parse", "non-numeric cell '" + cell + "' in " + where);
    }
    require(pos == cell.size(), "csv_parse", "non-numeric cell '" + cell + "' in " + where);
    require(std::isfinite(v), "csv_parse", "non-finite cell in " + where);
    return v;
}

}  // namespace detail

// Schema file: one `name,kind[,n_categories]` line per column, plus an
// optional `group=<column>` line naming the grouping column for random
// effects. Blank lines and #-comments are skipped.
inline Schema load_schema(const std::string& text) {
    Schema schema;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("group=", 0) == 0) {
            schema.group_column = detail::trim(line.substr(6));
            require(!schema.group_column.empty(), "schema_invalid", "empty group column name");
            continue;
        }
        const auto parts = detail::split_csv_line(line);
        require(parts.size() == 2 || parts.size() == 3, "schema_invalid",
                "bad schema line '" + line + "'");
        ColumnSchema col;
        col.name = parts[0];
        if (parts[1] == "continuous")
            col.kind = ColumnKind::continuous;
        else if (parts[1] == "ordinal")
            col.kind = ColumnKind::ordinal;
        else if (parts[1] == "nominal")
            col.kind = ColumnKind::nominal;
        else
            throw error("schema_invalid", "unknown column kind '" + parts[1] + "'");
        if (col.kind == ColumnKind::nominal) {
            require(parts.size() == 3, "schema_invalid",
                    "nominal column '" + col.name + "' needs n_categories");
            col.n_categories = static_cast<int>(detail::parse_number(parts[2], "schema"));
        } else {
            require(parts.size() == 2, "schema_invalid",
                    "n_categories given for non-nominal column '" + col.name + "'");
        }
        schema.columns.push_back(col);
    }
    schema.validate();
    return schema;
}

inline Dataset load_dataset(const std::string& csv_text, const Schema& schema) {
    schema.validate();
    std::istringstream in(csv_text);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "csv_parse", "empty CSV input");
    const auto header = detail::split_csv_line(line);

    const bool grouped = !schema.group_column.empty();
    std::vector<int> col_of(schema.n_cols(), -1);
    int group_col = -1;
    {
        std::vector<std::string> expected;
        expected.reserve(header.size());
        for (const auto& c : schema.columns) expected.push_back(c.name);
        if (grouped) expected.push_back(schema.group_column);
        require(header.size() == expected.size(), "csv_parse",
                "header has " + std::to_string(header.size()) + " columns, schema expects " +
                    std::to_string(expected.size()));
        for (std::size_t h = 0; h < header.size(); ++h) {
            bool known = false;
            for (int j = 0; j < schema.n_cols(); ++j)
                if (header[h] == schema.columns[j].name) {
                    require(col_of[j] < 0, "csv_parse", "duplicate header '" + header[h] + "'");
                    col_of[j] = static_cast<int>(h);
                    known = true;
                }
            if (grouped && header[h] == schema.group_column) {
                group_col = static_cast<int>(h);
                known = true;
            }
            require(known, "csv_parse", "unknown column '" + header[h] + "'");
        }
        for (int j = 0; j < schema.n_cols(); ++j)
            require(col_of[j] >= 0, "csv_parse", "missing column '" + schema.columns[j].name + "'");
        if (grouped)
            require(group_col >= 0, "csv_parse", "missing group column '" + schema.group_column + "'");
    }

    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        require(cells.size() == header.size(), "csv_parse",
                "row " + std::to_string(rows.size() + 1) + " has wrong column count");
        rows.push_back(std::move(cells));
    }
    const int n = static_cast<int>(rows.size());
    require(n >= 1, "csv_parse", "dataset has no data rows");

    Dataset data;
    data.schema = schema;
    data.cells = Matrix::Zero(n, schema.n_cols());
    data.mask.setConstant(n, schema.n_cols(), false);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < schema.n_cols(); ++j) {
            const std::string& cell = rows[i][col_of[j]];
            const auto& col = schema.columns[j];
            if (detail::is_missing_marker(cell)) {
                data.mask(i, j) = true;
                continue;
            }
            const double v = detail::parse_number(cell, "column '" + col.name + "'");
            if (col.kind == ColumnKind::nominal) {
                const double r = std::round(v);
                require(v == r && r >= 0.0 && r < col.n_categories, "csv_parse",
                        "nominal code " + cell + " outside 0.." +
                            std::to_string(col.n_categories - 1) + " in column '" + col.name + "'");
            }
            data.cells(i, j) = v;
        }
    }
    for (int j = 0; j < schema.n_cols(); ++j) {
        bool any = false;
        for (int i = 0; i < n && !any; ++i) any = !data.mask(i, j);
        require(any, "csv_parse", "column '" + schema.columns[j].name + "' is fully missing");
    }

    if (grouped) {
        data.group.resize(n);
        int max_id = -1;
        for (int i = 0; i < n; ++i) {
            const std::string& cell = rows[i][group_col];
            require(!detail::is_missing_marker(cell), "csv_parse", "missing group label");
            const double v = detail::parse_number(cell, "group column");
            require(v == std::round(v) && v >= 0.0, "csv_parse",
                    "group labels must be nonnegative integers");
            data.group[i] = static_cast<int>(v);
            max_id = std::max(max_id, data.group[i]);
        }
        data.n_groups = max_id + 1;
    }
    return data;
}

inline std::vector<double> observed_column(const Dataset& data, int j) {
    std::vector<double> out;
    for (int i = 0; i < data.n_rows(); ++i)
        if (data.observed(i, j)) out.push_back(data.cells(i, j));
    return out;
}

}  // namespace copmix
