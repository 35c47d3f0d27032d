#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "copmix/kernel.hpp"

namespace copmix {

struct ImputedDraw {
    int iteration = 0;
    Matrix values;  // N x n_cols, observed cells verbatim, missing cells imputed
};

// Evenly spaced draw schedule over the post-burn-in window: burn + k*spacing
// for k = 1..m with spacing floor((S - burn)/m); m = 1 picks the last sweep.
inline std::vector<int> select_imputation_iterations(int n_iter, int burn_in, int m) {
    require(m >= 1, "config_invalid", "m must be at least 1");
    require(burn_in >= 0 && burn_in < n_iter, "config_invalid", "burn_in must be below n_iter");
    const int window = n_iter - burn_in;
    require(m <= window, "config_invalid",
            "m exceeds the post-burn-in draw count (" + std::to_string(window) + ")");
    const int spacing = window / m;
    std::vector<int> iters;
    iters.reserve(static_cast<std::size_t>(m));
    for (int k = 1; k <= m; ++k) iters.push_back(burn_in + k * spacing);
    return iters;
}

// Observer hook that materializes the target chain's completed dataset at the
// scheduled iterations.
class ImputationCollector {
public:
    ImputationCollector(int n_iter, int burn_in, int m)
        : schedule_(select_imputation_iterations(n_iter, burn_in, m)) {}

    void observe(int iteration, const ChainState& target) {
        if (next_ < schedule_.size() && iteration == schedule_[next_]) {
            draws_.push_back({iteration, target.completed});
            ++next_;
        }
    }

    const std::vector<ImputedDraw>& draws() const { return draws_; }

private:
    std::vector<int> schedule_;
    std::size_t next_ = 0;
    std::vector<ImputedDraw> draws_;
};

struct PooledEstimate {
    double point = 0.0;
    double within_var = 0.0;
    double between_var = 0.0;
    double total_var = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

// Rubin (1987): point = mean, total = W + (1 + 1/m) B, interval +-1.96 sd.
inline PooledEstimate rubin_pool(const std::vector<double>& estimates,
                                 const std::vector<double>& variances) {
    const auto m = estimates.size();
    require(m >= 2, "domain", "rubin_pool needs at least two imputations");
    require(variances.size() == m, "domain", "estimate/variance count mismatch");
    PooledEstimate out;
    for (std::size_t k = 0; k < m; ++k) {
        out.point += estimates[k];
        out.within_var += variances[k];
    }
    out.point /= static_cast<double>(m);
    out.within_var /= static_cast<double>(m);
    for (double e : estimates) out.between_var += (e - out.point) * (e - out.point);
    out.between_var /= static_cast<double>(m - 1);
    out.total_var = out.within_var + (1.0 + 1.0 / static_cast<double>(m)) * out.between_var;
    const double half = 1.96 * std::sqrt(out.total_var);
    out.ci_lo = out.point - half;
    out.ci_hi = out.point + half;
    return out;
}

struct GlmFit {
    std::vector<std::string> names;
    Vector coef;
    Vector variance;  // inverse observed information diagonal
};

// Poisson regression with a log link by IRLS; nominal predictors expand to
// dummy columns against baseline category 0. Exists to reproduce the pooled
// analysis-model checks, not as a general GLM.
inline GlmFit fit_poisson_glm(const Matrix& values, const Schema& schema,
                              const std::string& response,
                              const std::vector<std::string>& predictors) {
    const int n = static_cast<int>(values.rows());
    const auto col_index = [&](const std::string& name) {
        for (int j = 0; j < schema.n_cols(); ++j)
            if (schema.columns[static_cast<std::size_t>(j)].name == name) return j;
        throw error("config_invalid", "unknown column '" + name + "' in formula");
    };

    const int y_col = col_index(response);
    Vector y = values.col(y_col);
    for (int i = 0; i < n; ++i)
        require(y(i) >= 0.0 && y(i) == std::round(y(i)), "domain",
                "Poisson response must be nonnegative integers");

    std::vector<std::string> names{"(intercept)"};
    std::vector<Vector> cols{Vector::Ones(n)};
    for (const auto& name : predictors) {
        const int j = col_index(name);
        const auto& cs = schema.columns[static_cast<std::size_t>(j)];
        if (cs.kind == ColumnKind::nominal) {
            for (int cat = 1; cat < cs.n_categories; ++cat) {
                Vector dummy(n);
                for (int i = 0; i < n; ++i)
                    dummy(i) = (static_cast<int>(values(i, j)) == cat) ? 1.0 : 0.0;
                cols.push_back(dummy);
                names.push_back(name + "=" + std::to_string(cat));
            }
        } else {
            cols.push_back(values.col(j));
            names.push_back(name);
        }
    }
    const int k = static_cast<int>(cols.size());
    Matrix x(n, k);
    for (int j = 0; j < k; ++j) x.col(j) = cols[static_cast<std::size_t>(j)];

    const double ybar = y.mean();
    require(ybar > 0.0, "domain", "degenerate all-zero Poisson response");
    Vector beta = Vector::Zero(k);
    beta(0) = std::log(ybar);
    Matrix info(k, k);
    for (int it = 0; it < 100; ++it) {
        const Vector eta = x * beta;
        Vector mu(n);
        for (int i = 0; i < n; ++i) {
            require(eta(i) < 50.0, "no_convergence", "Poisson IRLS diverged");
            mu(i) = std::exp(eta(i));
        }
        info = x.transpose() * mu.asDiagonal() * x;
        Eigen::LLT<Matrix> llt(info);
        require(llt.info() == Eigen::Success, "rank_deficient",
                "Poisson design matrix is rank deficient");
        const Vector delta = llt.solve(x.transpose() * (y - mu));
        beta += delta;
        if (delta.cwiseAbs().maxCoeff() < 1e-10) {
            GlmFit fit;
            fit.names = names;
            fit.coef = beta;
            const Matrix cov = llt.solve(Matrix::Identity(k, k));
            fit.variance = cov.diagonal();
            return fit;
        }
    }
    throw error("no_convergence", "Poisson IRLS did not converge in 100 iterations");
}

struct AccuracyRow {
    std::string column;
    int n_deleted = 0;
    bool misclassification = false;  // false: mean Euclidean distance
    double value = 0.0;
};

// Average discrepancy on the artificially deleted cells: Euclidean distance
// per draw for continuous-valued columns, misclassification rate for discrete
// ones (nominal always; integer-valued ordinals may be flagged discrete).
inline std::vector<AccuracyRow> imputation_accuracy(
    const Dataset& truth, const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& deleted,
    const std::vector<ImputedDraw>& draws, const std::vector<bool>& discrete) {
    require(!draws.empty(), "domain", "no imputed draws supplied");
    require(truth.cells.rows() == deleted.rows() && truth.cells.cols() == deleted.cols(),
            "domain", "truth/mask shape mismatch");
    for (const auto& d : draws)
        require(d.values.rows() == truth.cells.rows() && d.values.cols() == truth.cells.cols(),
                "domain", "imputed draw shape mismatch");
    require(static_cast<int>(discrete.size()) == truth.schema.n_cols(), "domain",
            "discrete flag count mismatch");

    std::vector<AccuracyRow> rows;
    for (int j = 0; j < truth.schema.n_cols(); ++j) {
        AccuracyRow row;
        row.column = truth.schema.columns[static_cast<std::size_t>(j)].name;
        row.misclassification = discrete[static_cast<std::size_t>(j)];
        for (int i = 0; i < truth.n_rows(); ++i)
            if (deleted(i, j)) ++row.n_deleted;
        if (row.n_deleted == 0) {
            rows.push_back(row);
            continue;
        }
        double acc = 0.0;
        for (const auto& d : draws) {
            double stat = 0.0;
            for (int i = 0; i < truth.n_rows(); ++i) {
                if (!deleted(i, j)) continue;
                const double diff = d.values(i, j) - truth.cells(i, j);
                if (row.misclassification)
                    stat += (diff != 0.0) ? 1.0 : 0.0;
                else
                    stat += diff * diff;
            }
            acc += row.misclassification ? stat / row.n_deleted : std::sqrt(stat);
        }
        row.value = acc / static_cast<double>(draws.size());
        rows.push_back(row);
    }
    return rows;
}

}  // namespace copmix
