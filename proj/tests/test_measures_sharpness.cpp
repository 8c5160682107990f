#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "genmeter/measures/gradients.hpp"
#include "genmeter/measures/pac_bayes.hpp"
#include "genmeter/measures/sharpness.hpp"
#include "genmeter/params.hpp"
#include "genmeter/rng.hpp"

using namespace genmeter;

namespace {

// L(theta) = 0.5 * a * theta_0^2 around a shiftable center.
BatchObjective quadratic_objective(double a, double center = 0.0) {
    return BatchObjective{
        [a, center](const std::vector<double>& th) {
            double d = th[0] - center;
            return 0.5 * a * d * d;
        },
        [a, center](const std::vector<double>& th) {
            return std::vector<double>{a * (th[0] - center)};
        }};
}

}  // namespace

TEST_CASE("log_spaced radii hit both endpoints") {
    auto r = log_spaced(1e-3, 1e-1, 5);
    REQUIRE(r.size() == 5);
    CHECK(r.front() == Catch::Approx(1e-3));
    CHECK(r.back() == Catch::Approx(1e-1));
    for (std::size_t i = 1; i < r.size(); ++i) {
        CHECK(r[i] > r[i - 1]);
        // constant ratio between neighbors
        CHECK(r[i] / r[i - 1] == Catch::Approx(r[1] / r[0]).epsilon(1e-10));
    }
    CHECK_THROWS_AS(log_spaced(0.0, 1.0, 3), Error);
    CHECK_THROWS_AS(log_spaced(1.0, 1.0, 3), Error);
    CHECK_THROWS_AS(log_spaced(1e-3, 1e-1, 1), Error);
}

TEST_CASE("one-step ascent sharpness on quadratics") {
    SECTION("single batch, exact arithmetic") {
        // L = theta^2 (a = 2) at theta = 1, rho = 0.1: ascend to 1.1,
        // delta = 1.21 - 1.
        std::vector<BatchObjective> b = {quadratic_objective(2.0)};
        auto s = sam_sharpness(b, {1.0}, 0.1);
        CHECK(s.value == Catch::Approx(0.21).margin(1e-12));
        CHECK(s.degenerate_batches == 0);
        CHECK_FALSE(s.all_degenerate);
    }
    SECTION("degenerate batches contribute zero but stay in the mean") {
        std::vector<BatchObjective> b = {quadratic_objective(2.0, 1.0),  // grad 0 at theta = 1
                                         quadratic_objective(2.0)};
        auto s = sam_sharpness(b, {1.0}, 0.1);
        CHECK(s.degenerate_batches == 1);
        CHECK(s.value == Catch::Approx(0.21 / 2.0).margin(1e-12));
    }
    SECTION("at an exact minimum every batch is degenerate and the value is zero") {
        std::vector<BatchObjective> b = {quadratic_objective(1.0), quadratic_objective(3.0)};
        auto s = sam_sharpness(b, {0.0}, 0.05);
        CHECK(s.all_degenerate);
        CHECK(s.degenerate_batches == 2);
        CHECK(s.value == 0.0);
    }
    SECTION("sharper curvature gives larger sharpness") {
        std::vector<BatchObjective> flat = {quadratic_objective(0.5)};
        std::vector<BatchObjective> sharp = {quadratic_objective(8.0)};
        CHECK(sam_sharpness(sharp, {1.0}, 0.05).value > sam_sharpness(flat, {1.0}, 0.05).value);
    }
    CHECK_THROWS_AS(sam_sharpness({}, {1.0}, 0.1), Error);
    CHECK_THROWS_AS(sam_sharpness({quadratic_objective(1.0)}, {1.0}, 0.0), Error);
}

TEST_CASE("adaptive sharpness maximizes the radius-normalized ascent") {
    // For L = theta^2 at theta = 1: sharpness(rho)/rho = 2 + rho,
    // increasing in rho, so the largest radius wins.
    std::vector<BatchObjective> b = {quadratic_objective(2.0)};
    auto a = adaptive_sharpness(b, {1.0}, {0.01, 0.1});
    REQUIRE(a.ok);
    REQUIRE(a.ratios.size() == 2);
    CHECK(a.ratios[0] == Catch::Approx(2.01).margin(1e-10));
    CHECK(a.ratios[1] == Catch::Approx(2.1).margin(1e-10));
    CHECK(a.value == Catch::Approx(2.1).margin(1e-10));

    SECTION("all radii degenerate reports unusable") {
        std::vector<BatchObjective> flat = {quadratic_objective(5.0, 1.0)};
        auto bad = adaptive_sharpness(flat, {1.0}, {0.01, 0.1});
        CHECK_FALSE(bad.ok);
        CHECK(bad.ratios.empty());
    }
    CHECK_THROWS_AS(adaptive_sharpness(b, {1.0}, {}), Error);
}

TEST_CASE("noise sharpness variants") {
    // Two-coordinate bowl: L = theta_0^2 + theta_1^2.
    auto bowl = [](const std::vector<double>& th) {
        double s = 0.0;
        for (double x : th) s += x * x;
        return s;
    };
    ParamVector params;
    params.add("w", Tensor::row({1.0, -1.0}));

    SECTION("zero radius means zero sharpness") {
        for (NoiseKind k :
             {NoiseKind::kMagnitude, NoiseKind::kMagnitudeInit, NoiseKind::kMagnitudeFlat}) {
            auto r = noise_sharpness(bowl, params, params.flatten(), k, 0.0, 3, AggKind::kMax,
                                     1e-3, 42);
            REQUIRE(r.ok);
            if (k == NoiseKind::kMagnitudeInit) {
                CHECK(r.value == 0.0);  // also the distance factor is zero
            } else if (k == NoiseKind::kMagnitude) {
                CHECK(r.value == 0.0);
            } else {
                CHECK(r.value == 0.0);
            }
        }
    }
    SECTION("mean-aggregated magnitude variant matches the analytic expectation") {
        // Population std of {1, -1} is 1, so each coordinate gets N(0, r^2)
        // noise. E[delta L] = 2 r^2; the magnitude factor ||theta||/sqrt(2)
        // equals 1. The linear term gives delta L a std of 2 sqrt(2) r, so
        // the band is ~4 standard errors wide.
        double r = 0.1;
        auto res = noise_sharpness(bowl, params, std::nullopt, NoiseKind::kMagnitude, r, 100000,
                                   AggKind::kMean, 1e-3, 7);
        REQUIRE(res.ok);
        CHECK(res.value == Catch::Approx(2.0 * r * r).margin(4e-3));
    }
    SECTION("at the initialization the init variant is exactly zero") {
        auto res = noise_sharpness(bowl, params, params.flatten(), NoiseKind::kMagnitudeInit, 0.1,
                                   3, AggKind::kMax, 1e-3, 7);
        REQUIRE(res.ok);
        CHECK(res.value == 0.0);
    }
    SECTION("missing initialization falls back with a note") {
        auto res = noise_sharpness(bowl, params, std::nullopt, NoiseKind::kMagnitudeInit, 0.1, 3,
                                   AggKind::kMax, 1e-3, 7);
        REQUIRE(res.ok);
        CHECK_FALSE(res.note.empty());
    }
    SECTION("single-element tensors: std-scaled noise vanishes, magflat does not") {
        ParamVector single;
        single.add("w", Tensor::row({2.0}));
        auto zero_noise = noise_sharpness(bowl, single, std::nullopt, NoiseKind::kMagnitude, 0.1,
                                          3, AggKind::kMax, 1e-3, 7);
        REQUIRE(zero_noise.ok);
        CHECK(zero_noise.value == 0.0);  // std of one element is zero

        auto flat = noise_sharpness(bowl, single, std::nullopt, NoiseKind::kMagnitudeFlat, 0.1, 3,
                                    AggKind::kMax, 1e-3, 7);
        REQUIRE(flat.ok);
        CHECK(flat.value != 0.0);  // |theta| + eps keeps the noise alive
    }
    SECTION("non-finite perturbed losses are discarded") {
        int calls = 0;
        auto exploding = [&calls](const std::vector<double>& th) {
            ++calls;
            if (calls == 1) return th[0] * th[0];  // baseline evaluation
            throw NonFiniteError("boom");
            return 0.0;
        };
        ParamVector p;
        p.add("w", Tensor::row({1.0, 2.0}));
        auto res = noise_sharpness(exploding, p, std::nullopt, NoiseKind::kMagnitude, 0.1, 3,
                                   AggKind::kMax, 1e-3, 7);
        CHECK_FALSE(res.ok);
        CHECK(res.discarded_samples == 3);
        CHECK(res.note == "all perturbation samples non-finite");
    }
    SECTION("same seed reproduces, different seed varies") {
        auto a = noise_sharpness(bowl, params, std::nullopt, NoiseKind::kMagnitudeFlat, 0.1, 3,
                                 AggKind::kMax, 1e-3, 7);
        auto b = noise_sharpness(bowl, params, std::nullopt, NoiseKind::kMagnitudeFlat, 0.1, 3,
                                 AggKind::kMax, 1e-3, 7);
        auto c = noise_sharpness(bowl, params, std::nullopt, NoiseKind::kMagnitudeFlat, 0.1, 3,
                                 AggKind::kMax, 1e-3, 8);
        CHECK(a.value == b.value);
        CHECK(a.value != c.value);
    }
}

TEST_CASE("gaussian KL closed forms") {
    CHECK(kl_gaussian_scalar(1.0, 1.0, 1.0) == Catch::Approx(0.5));
    CHECK(kl_gaussian_scalar(0.0, 1.0, 1.0) == 0.0);
    CHECK(kl_gaussian_scalar(0.0, 2.0, 2.0) == 0.0);
    // mu = 0, sq = 1, sp = 2: 0.5 * (1/4 - 1 - ln(1/4))
    CHECK(kl_gaussian_scalar(0.0, 1.0, 2.0) ==
          Catch::Approx(0.5 * (0.25 - 1.0 - std::log(0.25))));
    CHECK(kl_gaussian_scalar(3.0, 1.0, 1.0) == Catch::Approx(4.5));
    CHECK_THROWS_AS(kl_gaussian_scalar(0.0, 0.0, 1.0), Error);

    SECTION("diagonal KL sums coordinates and floors sigmas") {
        std::vector<double> mu = {1.0, 0.0};
        std::vector<double> sq = {1.0, 0.0};  // second coordinate gets floored
        CHECK(kl_diag_gaussian(mu, sq, 1.0, 1.0) == Catch::Approx(0.5));
        // with a tiny floor the zero-sigma coordinate dominates via -ln
        double kl = kl_diag_gaussian(mu, sq, 1.0, 1e-8);
        CHECK(kl > 0.5);
        CHECK(std::isfinite(kl));
        CHECK_THROWS_AS(kl_diag_gaussian(mu, {1.0}, 1.0, 1e-8), ShapeError);
    }
    SECTION("KL is nonnegative") {
        Rng rng(3);
        for (int t = 0; t < 50; ++t) {
            double mu = rng.normal();
            double sq = std::exp(rng.normal());
            double sp = std::exp(rng.normal());
            CHECK(kl_gaussian_scalar(mu, sq, sp) >= -1e-12);
        }
    }
}

TEST_CASE("PAC-Bayes bound arithmetic") {
    SECTION("zero parameters with matched sigmas: pure complexity term") {
        std::vector<double> theta(8, 0.0);
        auto perfect = [](const std::vector<double>&) { return 0.0; };
        std::size_t n = 100;
        double delta = 0.05;
        // sigma_post == sigma_prior and theta == 0 make KL vanish.
        auto r = pac_bayes_bound(perfect, theta, std::nullopt, PacBayesKind::kIsotropic, 0.1, 0.1,
                                 delta, 8, n, 1e-8, 1);
        REQUIRE(r.ok);
        CHECK(r.kl == Catch::Approx(0.0).margin(1e-12));
        CHECK(r.gibbs_error == 0.0);
        double want = std::sqrt(std::log(2.0 * std::sqrt(100.0) / delta) / 200.0);
        CHECK(r.bound == Catch::Approx(want).epsilon(1e-12));
    }
    SECTION("bound dominates the Gibbs error") {
        Rng rng(17);
        std::vector<double> theta(5);
        for (auto& x : theta) x = rng.normal();
        auto noisy = [&rng](const std::vector<double>&) { return rng.uniform(); };
        for (auto kind : {PacBayesKind::kIsotropic, PacBayesKind::kMagnitude,
                          PacBayesKind::kMagnitudeFlat}) {
            auto r = pac_bayes_bound(noisy, theta, std::nullopt, kind, 0.01, 0.1, 0.05, 8, 50,
                                     1e-8, 2);
            REQUIRE(r.ok);
            CHECK(r.bound >= r.gibbs_error);
            CHECK(r.kl >= 0.0);
        }
    }
    SECTION("init-centered prior shrinks KL when the run barely moved") {
        std::vector<double> theta = {1.0, -2.0, 0.5};
        std::vector<double> init = theta;  // no movement at all
        auto err = [](const std::vector<double>&) { return 0.25; };
        auto centered = pac_bayes_bound(err, theta, init, PacBayesKind::kMagnitudeInit, 0.01, 0.1,
                                        0.05, 8, 50, 1e-8, 3);
        auto origin = pac_bayes_bound(err, theta, std::nullopt, PacBayesKind::kMagnitude, 0.01,
                                      0.1, 0.05, 8, 50, 1e-8, 3);
        REQUIRE(centered.ok);
        REQUIRE(origin.ok);
        CHECK(centered.kl < origin.kl);
        CHECK(centered.bound < origin.bound);
    }
    SECTION("init variant demands the initialization") {
        auto err = [](const std::vector<double>&) { return 0.0; };
        CHECK_THROWS_AS(pac_bayes_bound(err, {1.0}, std::nullopt, PacBayesKind::kMagnitudeInit,
                                        0.01, 0.1, 0.05, 4, 10, 1e-8, 1),
                        Error);
    }
    SECTION("posterior draws that always explode mark the result unusable") {
        auto explode = [](const std::vector<double>&) -> double {
            throw NonFiniteError("overflow");
        };
        auto r = pac_bayes_bound(explode, {1.0, 2.0}, std::nullopt, PacBayesKind::kIsotropic, 0.01,
                                 0.1, 0.05, 4, 10, 1e-8, 1);
        CHECK_FALSE(r.ok);
        CHECK(r.note == "all posterior draws non-finite");
    }
    SECTION("deterministic per seed") {
        std::vector<double> theta = {0.3, -0.7, 1.1};
        auto stochastic_err = [](const std::vector<double>& th) {
            // error depends on the draw so seeds matter
            return th[0] > 0.3 ? 0.1 : 0.2;
        };
        auto a = pac_bayes_bound(stochastic_err, theta, std::nullopt, PacBayesKind::kIsotropic,
                                 0.5, 0.1, 0.05, 8, 10, 1e-8, 11);
        auto b = pac_bayes_bound(stochastic_err, theta, std::nullopt, PacBayesKind::kIsotropic,
                                 0.5, 0.1, 0.05, 8, 10, 1e-8, 11);
        auto c = pac_bayes_bound(stochastic_err, theta, std::nullopt, PacBayesKind::kIsotropic,
                                 0.5, 0.1, 0.05, 8, 10, 1e-8, 12);
        CHECK(a.bound == b.bound);
        CHECK((a.gibbs_error != c.gibbs_error || a.bound != c.bound));
    }
}

TEST_CASE("flatness proxy from squared gradients") {
    // Two batches with per-coordinate mean squared gradients (0, 3).
    std::vector<std::vector<double>> grads = {{0.0, std::sqrt(3.0)}, {0.0, std::sqrt(3.0)}};
    CHECK(flatness_proxy(grads, 1.0, AggKind::kMean) == Catch::Approx(2.5));
    CHECK(flatness_proxy(grads, 1.0, AggKind::kMedian) == Catch::Approx(2.5));
    // harmonic mean of {1, 4} = 2 / (1 + 1/4)
    CHECK(flatness_proxy(grads, 1.0, AggKind::kHarmonicMean) == Catch::Approx(1.6));

    SECTION("never below lambda") {
        Rng rng(9);
        for (int t = 0; t < 20; ++t) {
            std::vector<std::vector<double>> g(3, std::vector<double>(5));
            for (auto& row : g)
                for (auto& x : row) x = rng.normal();
            double lambda = 0.01;
            CHECK(flatness_proxy(g, lambda, AggKind::kMean) >= lambda);
            CHECK(flatness_proxy(g, lambda, AggKind::kHarmonicMean) >= lambda);
        }
    }
    CHECK_THROWS_AS(flatness_proxy(grads, 0.0, AggKind::kMean), Error);
    CHECK_THROWS_AS(flatness_proxy(grads, 1.0, AggKind::kMax), Error);
    CHECK_THROWS_AS(flatness_proxy({}, 1.0, AggKind::kMean), Error);
}

TEST_CASE("gradient noise statistics") {
    SECTION("two-point oracle") {
        // Single coordinate with values {0, 2}: mean 1, population var 1.
        std::vector<std::vector<double>> g = {{0.0}, {2.0}};
        CHECK(mean_coordinate_variance(g) == Catch::Approx(1.0));
        CHECK(gradient_noise_scale(g, 1e-12) == Catch::Approx(1.0).epsilon(1e-9));
    }
    SECTION("identical snapshots have zero noise") {
        std::vector<std::vector<double>> g = {{1.0, -2.0}, {1.0, -2.0}, {1.0, -2.0}};
        CHECK(mean_coordinate_variance(g) == 0.0);
        CHECK(gradient_noise_scale(g, 1e-12) == 0.0);
    }
    SECTION("zero-mean alternating gradients blow up the noise scale") {
        std::vector<std::vector<double>> g = {{1.0}, {-1.0}};
        // var 1, mean 0: ratio 1/eps
        CHECK(gradient_noise_scale(g, 1e-12) == Catch::Approx(1e12).epsilon(1e-6));
    }
    SECTION("coordinate averaging") {
        // coord 0: var 1; coord 1: var 0 -> average 0.5
        std::vector<std::vector<double>> g = {{0.0, 5.0}, {2.0, 5.0}};
        CHECK(mean_coordinate_variance(g) == Catch::Approx(0.5));
    }
    CHECK_THROWS_AS(mean_coordinate_variance({{1.0}}), Error);
    CHECK_THROWS_AS(mean_coordinate_variance({{1.0}, {1.0, 2.0}}), ShapeError);
    CHECK_THROWS_AS(gradient_noise_scale({{1.0}, {2.0}}, 0.0), Error);
}

TEST_CASE("aggregate helpers") {
    std::vector<double> v = {4.0, 1.0, 3.0, 2.0};
    CHECK(aggregate(v, AggKind::kMean) == 2.5);
    CHECK(aggregate(v, AggKind::kMax) == 4.0);
    CHECK(aggregate(v, AggKind::kMedian) == 2.5);
    CHECK(aggregate(v, AggKind::kStd) == Catch::Approx(std::sqrt(1.25)));
    CHECK(aggregate({2.0, 4.0}, AggKind::kHarmonicMean) == Catch::Approx(8.0 / 3.0));
    CHECK_THROWS_AS(aggregate({}, AggKind::kMean), Error);
    CHECK_THROWS_AS(aggregate({-1.0, 2.0}, AggKind::kHarmonicMean), Error);

    CHECK(parse_agg("mean") == AggKind::kMean);
    CHECK(parse_agg("harmonic_mean") == AggKind::kHarmonicMean);
    CHECK_THROWS_AS(parse_agg("avg"), ConfigError);
    CHECK(std::string(to_string(AggKind::kMedian)) == "median");
}
