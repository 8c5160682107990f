#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "genmeter/errors.hpp"
#include "genmeter/format.hpp"
#include "genmeter/params.hpp"
#include "genmeter/rng.hpp"
#include "genmeter/tensor.hpp"

using namespace genmeter;

TEST_CASE("derive_seed separates streams by tag and index") {
    const std::uint64_t base = 42;
    std::set<std::uint64_t> seen;
    seen.insert(derive_seed(base, "a"));
    seen.insert(derive_seed(base, "b"));
    seen.insert(derive_seed(base, "a", 1));
    seen.insert(derive_seed(base + 1, "a"));
    REQUIRE(seen.size() == 4);
    REQUIRE(derive_seed(base, "a", 7) == derive_seed(base, "a", 7));
}

TEST_CASE("uniform lies in [0,1) and replays per seed") {
    Rng a(9), b(9);
    for (int i = 0; i < 1000; ++i) {
        double x = a.uniform();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
        REQUIRE(x == b.uniform());
    }
}

TEST_CASE("normal draws have sane first two moments") {
    Rng rng(123);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(std::fabs(mean) < 0.02);
    REQUIRE(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("rademacher is always plus or minus one") {
    Rng rng(5);
    bool saw_pos = false, saw_neg = false;
    for (int i = 0; i < 200; ++i) {
        double x = rng.rademacher();
        REQUIRE((x == 1.0 || x == -1.0));
        saw_pos |= x == 1.0;
        saw_neg |= x == -1.0;
    }
    REQUIRE(saw_pos);
    REQUIRE(saw_neg);
}

TEST_CASE("index covers the full range") {
    Rng rng(17);
    std::set<std::size_t> seen;
    for (int i = 0; i < 400; ++i) seen.insert(rng.index(7));
    REQUIRE(seen == std::set<std::size_t>{0, 1, 2, 3, 4, 5, 6});
}

TEST_CASE("sample_without_replacement yields distinct indices") {
    Rng rng(3);
    auto s = rng.sample_without_replacement(50, 20);
    REQUIRE(s.size() == 20);
    std::set<std::size_t> uniq(s.begin(), s.end());
    REQUIRE(uniq.size() == 20);
    for (auto i : uniq) REQUIRE(i < 50);
}

TEST_CASE("tensor enforces shape/value consistency") {
    Tensor t({2, 3}, 1.5);
    REQUIRE(t.size() == 6);
    REQUIRE(t.rows() == 2);
    REQUIRE(t.cols() == 3);
    REQUIRE_THROWS_AS(Tensor({2, 0}), ShapeError);
    REQUIRE_THROWS_AS(Tensor({2, 2}, std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST_CASE("require_finite rejects NaN and infinity") {
    Tensor t({2}, std::vector<double>{1.0, std::numeric_limits<double>::quiet_NaN()});
    REQUIRE_THROWS_AS(require_finite(t, "test"), NonFiniteError);
    REQUIRE_THROWS_AS(require_finite(std::numeric_limits<double>::infinity(), "test"),
                      NonFiniteError);
    REQUIRE_NOTHROW(require_finite(0.0, "test"));
}

TEST_CASE("format_double round-trips and spells non-finite sentinels") {
    REQUIRE(format_double(0.5) == "0.5");
    REQUIRE(format_double(std::numeric_limits<double>::quiet_NaN()) == "NaN");
    REQUIRE(format_double(std::numeric_limits<double>::infinity()) == "Infinity");
    REQUIRE(format_double(-std::numeric_limits<double>::infinity()) == "-Infinity");
    Rng rng(77);
    for (int i = 0; i < 200; ++i) {
        double x = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-20.0, 20.0));
        REQUIRE(std::stod(format_double(x)) == x);
    }
}

TEST_CASE("param vector flatten/unflatten round-trips in segment order") {
    ParamVector p;
    p.add("w0", Tensor({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}));
    p.add("b0", Tensor({3}, std::vector<double>{7, 8, 9}));
    REQUIRE(p.dim() == 9);
    auto flat = p.flatten();
    REQUIRE(flat == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
    for (double& x : flat) x *= 2.0;
    ParamVector q = p.with_flat(flat);
    REQUIRE(q.segment(0).tensor.at(1, 2) == 12.0);
    REQUIRE(q.segment(1).tensor[0] == 14.0);
    REQUIRE(q.same_structure(p));
    REQUIRE_THROWS_AS(p.unflatten(std::vector<double>(8, 0.0)), ShapeError);
}

TEST_CASE("param vector norms and distance") {
    ParamVector p;
    p.add("w", Tensor({2}, std::vector<double>{3.0, 4.0}));
    REQUIRE(l2_norm(p) == Catch::Approx(5.0));
    REQUIRE(l1_norm(p) == Catch::Approx(7.0));
    ParamVector q = p;
    q.segment(0).tensor[0] = 0.0;
    REQUIRE(l2_distance(p, q) == Catch::Approx(3.0));
    REQUIRE(dot(p, q) == Catch::Approx(16.0));
}
