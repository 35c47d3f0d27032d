#include <catch2/catch.hpp>
#include <set>

#include "copmix/data.hpp"
#include "copmix/rng.hpp"

using namespace copmix;

namespace {

Schema three_col_schema() {
    Schema s;
    s.columns = {{"y1", ColumnKind::continuous, 0},
                 {"y2", ColumnKind::ordinal, 0},
                 {"y3", ColumnKind::nominal, 4}};
    return s;
}

}  // namespace

TEST_CASE("load_dataset basics") {
    const auto schema = three_col_schema();
    SECTION("no missing markers, mask all false") {
        const auto d = load_dataset("y1,y2,y3\n1.5,2,0\n2.5,1,3\n0.5,4,2\n", schema);
        CHECK(d.n_rows() == 3);
        CHECK(!d.mask.any());
        CHECK(d.cells(1, 2) == 3.0);
    }
    SECTION("NA and empty cells set the mask exactly there") {
        const auto d = load_dataset("y1,y2,y3\n1.5,2,0\n2.5,NA,3\n,4,2\n", schema);
        CHECK(d.mask(1, 1));
        CHECK(d.mask(2, 0));
        CHECK(d.mask.cast<int>().sum() == 2);
        CHECK(d.observed(0, 0));
    }
    SECTION("header order may differ from the schema") {
        const auto d = load_dataset("y3,y1,y2\n0,1.5,2\n3,2.5,1\n", schema);
        CHECK(d.cells(1, 0) == 2.5);
        CHECK(d.cells(1, 2) == 3.0);
    }
    SECTION("nominal code outside 0..Q errors") {
        CHECK_THROWS_AS(load_dataset("y1,y2,y3\n1.5,2,5\n", schema), error);
        CHECK_THROWS_AS(load_dataset("y1,y2,y3\n1.5,2,-1\n", schema), error);
        CHECK_THROWS_AS(load_dataset("y1,y2,y3\n1.5,2,1.5\n", schema), error);
    }
    SECTION("unknown column errors") {
        CHECK_THROWS_AS(load_dataset("y1,y2,zzz\n1.5,2,0\n", schema), error);
    }
    SECTION("non-numeric cell errors") {
        CHECK_THROWS_AS(load_dataset("y1,y2,y3\nfoo,2,0\n", schema), error);
    }
    SECTION("fully missing column errors") {
        CHECK_THROWS_AS(load_dataset("y1,y2,y3\nNA,2,0\n,1,3\n", schema), error);
    }
    SECTION("ragged row errors") {
        CHECK_THROWS_AS(load_dataset("y1,y2,y3\n1.5,2\n", schema), error);
    }
}

TEST_CASE("grouped dataset") {
    Schema s;
    s.columns = {{"a", ColumnKind::continuous, 0}, {"b", ColumnKind::continuous, 0}};
    s.group_column = "site";
    const auto d = load_dataset("a,b,site\n1,2,0\n3,4,1\n5,6,1\n", s);
    CHECK(d.group == std::vector<int>{0, 1, 1});
    CHECK(d.n_groups == 2);
    CHECK_THROWS_AS(load_dataset("a,b,site\n1,2,NA\n", s), error);
}

TEST_CASE("schema file parsing") {
    const auto s = load_schema("# comment\ny1,continuous\ny2,ordinal\n\ny3,nominal,4\ngroup=site\n");
    CHECK(s.n_cols() == 3);
    CHECK(s.p() == 2);
    CHECK(s.q() == 3);
    CHECK(s.group_column == "site");
    CHECK_THROWS_AS(load_schema("y1,weird\n"), error);
    CHECK_THROWS_AS(load_schema("y1,nominal\n"), error);                   // missing n_categories
    CHECK_THROWS_AS(load_schema("y1,nominal,4\ny2,continuous\n"), error);  // nominal not last
    CHECK_THROWS_AS(load_schema("y1,continuous\ny1,ordinal\n"), error);    // duplicate name
    CHECK_THROWS_AS(load_schema("y1,nominal,1\n"), error);                 // too few categories
}

TEST_CASE("ecdf eval and inverse under the rank/(n+1) convention") {
    SECTION("distinct values") {
        const EmpiricalCdf f({1.0, 2.0, 3.0});
        CHECK(f.eval(2.0) == Approx(0.5));
        CHECK(f.eval(1.0) == Approx(0.25));
        CHECK(f.eval(3.0) == Approx(0.75));
        CHECK(f.eval(0.0) == Approx(0.0));  // below the sample: rank 0
        CHECK(f.inverse(0.5) == 2.0);
        CHECK(f.inverse(0.9) == 3.0);  // u >= n/(n+1) returns the maximum
        CHECK(f.inverse(0.01) == 1.0);
    }
    SECTION("ties share the rank of their last occurrence") {
        const EmpiricalCdf f({5.0, 5.0, 9.0});
        CHECK(f.eval(5.0) == Approx(0.5));
        CHECK(f.eval(9.0) == Approx(0.75));
        CHECK(f.inverse(0.5) == 5.0);
        CHECK(f.inverse(0.6) == 9.0);
    }
    SECTION("empty input errors") {
        CHECK_THROWS_AS(EmpiricalCdf(std::vector<double>{}), error);
    }
}

TEST_CASE("ecdf properties: round trip and open-interval range") {
    Rng rng(99, 0);
    std::vector<double> values;
    for (int i = 0; i < 200; ++i) values.push_back(rng.normal());
    values.push_back(values[10]);  // inject a tie
    const EmpiricalCdf f(values);
    const double n1 = static_cast<double>(values.size()) + 1.0;
    std::set<double> distinct(values.begin(), values.end());
    for (double y : distinct) {
        CHECK(f.inverse(f.eval(y)) == y);
        CHECK(f.eval(y) > 0.0);
        CHECK(f.eval(y) < 1.0);
    }
    CHECK(f.eval(f.max()) == Approx(values.size() / n1));
    CHECK(f.eval(f.min()) >= 1.0 / n1);
}
