#include <catch2/catch.hpp>
#include <set>

#include "copmix/imputation.hpp"
#include "copmix/tempering.hpp"
#include "test_util.hpp"

using namespace copmix;

TEST_CASE("imputation draw schedule") {
    SECTION("even spacing across the post-burn-in window") {
        const auto it = select_imputation_iterations(10000, 5000, 10);
        REQUIRE(it.size() == 10);
        CHECK(it.front() == 5500);
        CHECK(it[1] == 6000);
        CHECK(it.back() == 10000);
    }
    SECTION("m = 1 takes the last sweep") {
        const auto it = select_imputation_iterations(10000, 5000, 1);
        REQUIRE(it.size() == 1);
        CHECK(it[0] == 10000);
    }
    SECTION("m beyond the window errors") {
        CHECK_THROWS_AS(select_imputation_iterations(100, 90, 11), error);
        CHECK_THROWS_AS(select_imputation_iterations(100, 100, 1), error);
    }
}

TEST_CASE("collected imputations: observed cells immutable, imputed cells legal") {
    Schema schema;
    schema.columns = {{"x", ColumnKind::continuous, 0}, {"c", ColumnKind::nominal, 3}};
    const auto data = load_dataset(
        "x,c\n0.11,0\n0.52,2\nNA,1\n0.43,NA\n1.27,2\n0.74,1\nNA,NA\n0.22,0\n0.95,2\n1.80,1\n",
        schema);
    const auto ctx =
        ModelContext::from_dataset(data, Kernel::gaussian, Hyperparams::defaults(1, 2));

    RunControl rc;
    rc.n_iter = 200;
    rc.burn_in = 100;
    rc.seed = 5;
    ImputationCollector collector(rc.n_iter, rc.burn_in, 5);
    rc.observer = [&](int iter, const std::vector<ChainState>& chains) {
        collector.observe(iter, chains.front());
    };
    run(ctx, TemperingLadder({0.5, 1.0}), rc);

    const auto& draws = collector.draws();
    REQUIRE(draws.size() == 5);
    CHECK(draws[0].iteration == 120);
    CHECK(draws[4].iteration == 200);

    std::set<double> observed_x;
    for (int i = 0; i < data.n_rows(); ++i)
        if (data.observed(i, 0)) observed_x.insert(data.cells(i, 0));
    for (const auto& d : draws) {
        for (int i = 0; i < data.n_rows(); ++i) {
            if (data.observed(i, 0)) {
                CHECK(d.values(i, 0) == data.cells(i, 0));
            } else {
                // imputed ordered values come from the observed multiset
                CHECK(observed_x.count(d.values(i, 0)) == 1);
            }
            if (data.observed(i, 1)) {
                CHECK(d.values(i, 1) == data.cells(i, 1));
            } else {
                CHECK(d.values(i, 1) >= 0.0);
                CHECK(d.values(i, 1) <= 2.0);
            }
        }
    }
}

TEST_CASE("rubin_pool") {
    SECTION("hand-worked two-imputation example") {
        const auto p = rubin_pool({1.0, 3.0}, {0.5, 0.5});
        CHECK(p.point == Approx(2.0));
        CHECK(p.within_var == Approx(0.5));
        CHECK(p.between_var == Approx(2.0));
        CHECK(p.total_var == Approx(3.5));
        CHECK(p.ci_lo == Approx(2.0 - 1.96 * std::sqrt(3.5)));
        CHECK(p.ci_hi == Approx(2.0 + 1.96 * std::sqrt(3.5)));
    }
    SECTION("identical estimates have zero between-variance") {
        const auto p = rubin_pool({1.2, 1.2, 1.2}, {0.3, 0.4, 0.5});
        CHECK(p.between_var == 0.0);
        CHECK(p.total_var == Approx(0.4));
    }
    SECTION("m = 10 applies the 1.1 inflation factor") {
        std::vector<double> est, var;
        for (int k = 0; k < 10; ++k) {
            est.push_back(static_cast<double>(k));
            var.push_back(1.0);
        }
        const auto p = rubin_pool(est, var);
        const double b = testutil::variance(est);
        CHECK(p.total_var == Approx(1.0 + 1.1 * b));
    }
    SECTION("m < 2 errors") {
        CHECK_THROWS_AS(rubin_pool({1.0}, {0.5}), error);
    }
    SECTION("property: matches a direct reimplementation on random input") {
        Rng rng(7, 0);
        for (int rep = 0; rep < 200; ++rep) {
            const int m = 2 + static_cast<int>(rng.raw() % 12);
            std::vector<double> est, var;
            for (int k = 0; k < m; ++k) {
                est.push_back(rng.normal() * 3.0);
                var.push_back(rng.gamma(2.0, 1.0));
            }
            const auto p = rubin_pool(est, var);
            const double point = testutil::mean(est);
            const double w = testutil::mean(var);
            const double b = testutil::variance(est);
            const double total = w + (1.0 + 1.0 / m) * b;
            REQUIRE(p.point == Approx(point).margin(1e-12));
            REQUIRE(p.total_var == Approx(total).margin(1e-12));
        }
    }
}

TEST_CASE("fit_poisson_glm") {
    Schema schema;
    schema.columns = {{"y", ColumnKind::ordinal, 0},
                      {"x1", ColumnKind::continuous, 0},
                      {"x2", ColumnKind::continuous, 0},
                      {"g", ColumnKind::nominal, 3}};
    SECTION("intercept-only closed forms") {
        Matrix v = Matrix::Zero(6, 4);
        v.col(0).setOnes();
        auto fit = fit_poisson_glm(v, schema, "y", {});
        CHECK(fit.coef(0) == Approx(0.0).margin(1e-12));
        v.col(0).setConstant(2.0);
        fit = fit_poisson_glm(v, schema, "y", {});
        CHECK(fit.coef(0) == Approx(std::log(2.0)).margin(1e-12));
    }
    SECTION("recovers known coefficients within 3 standard errors") {
        Rng rng(8, 0);
        const int n = 5000;
        Matrix v(n, 4);
        const double b0 = 0.3, b1 = 0.5, b2 = -0.2, g1 = 0.4, g2 = -0.6;
        for (int i = 0; i < n; ++i) {
            v(i, 1) = rng.normal();
            v(i, 2) = rng.uniform();
            v(i, 3) = static_cast<double>(rng.uniform_int(0, 2));
            double eta = b0 + b1 * v(i, 1) + b2 * v(i, 2);
            if (v(i, 3) == 1.0) eta += g1;
            if (v(i, 3) == 2.0) eta += g2;
            v(i, 0) = static_cast<double>(poisson_quantile(std::exp(eta), rng.uniform()));
        }
        const auto fit = fit_poisson_glm(v, schema, "y", {"x1", "x2", "g"});
        REQUIRE(fit.names.size() == 5);  // intercept, x1, x2, g=1, g=2
        const std::vector<double> truth{b0, b1, b2, g1, g2};
        for (int k = 0; k < 5; ++k) {
            const double se = std::sqrt(fit.variance(k));
            INFO(fit.names[static_cast<std::size_t>(k)]);
            CHECK(std::abs(fit.coef(k) - truth[static_cast<std::size_t>(k)]) < 3.0 * se);
        }
    }
    SECTION("duplicate predictor is rank deficient") {
        Matrix v = Matrix::Zero(20, 4);
        Rng rng(9, 0);
        for (int i = 0; i < 20; ++i) {
            v(i, 1) = rng.normal();
            v(i, 2) = v(i, 1);
            v(i, 0) = 1.0;
        }
        CHECK_THROWS_AS(fit_poisson_glm(v, schema, "y", {"x1", "x2"}), error);
    }
    SECTION("negative or fractional responses are rejected") {
        Matrix v = Matrix::Zero(5, 4);
        v(0, 0) = -1.0;
        CHECK_THROWS_AS(fit_poisson_glm(v, schema, "y", {}), error);
        v(0, 0) = 0.5;
        CHECK_THROWS_AS(fit_poisson_glm(v, schema, "y", {}), error);
    }
}

TEST_CASE("imputation_accuracy") {
    Schema schema;
    schema.columns = {{"x", ColumnKind::continuous, 0}, {"c", ColumnKind::nominal, 3}};
    Dataset truth;
    truth.schema = schema;
    truth.cells = Matrix::Zero(3, 2);
    truth.cells << 2.0, 1.0, 4.0, 2.0, 6.0, 0.0;
    truth.mask.setConstant(3, 2, false);
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> deleted(3, 2);
    deleted.setConstant(false);
    const std::vector<bool> discrete{false, true};

    SECTION("perfect imputations score zero") {
        deleted(0, 0) = true;
        deleted(1, 1) = true;
        const std::vector<ImputedDraw> draws{{1, truth.cells}, {2, truth.cells}};
        const auto rows = imputation_accuracy(truth, deleted, draws, discrete);
        CHECK(rows[0].value == 0.0);
        CHECK(rows[1].value == 0.0);
        CHECK(rows[0].n_deleted == 1);
    }
    SECTION("single continuous cell: truth 2, imputed 5, distance 3") {
        deleted(0, 0) = true;
        Matrix imp = truth.cells;
        imp(0, 0) = 5.0;
        const auto rows = imputation_accuracy(truth, deleted, {{1, imp}}, discrete);
        CHECK(rows[0].value == Approx(3.0));
        CHECK_FALSE(rows[0].misclassification);
    }
    SECTION("two nominal cells, one wrong: rate one half") {
        deleted(0, 1) = true;
        deleted(2, 1) = true;
        Matrix imp = truth.cells;
        imp(0, 1) = 2.0;  // wrong
        const auto rows = imputation_accuracy(truth, deleted, {{1, imp}}, discrete);
        CHECK(rows[1].value == Approx(0.5));
        CHECK(rows[1].misclassification);
    }
    SECTION("shape mismatch errors") {
        const std::vector<ImputedDraw> bad{{1, Matrix::Zero(2, 2)}};
        CHECK_THROWS_AS(imputation_accuracy(truth, deleted, bad, discrete), error);
    }
}
