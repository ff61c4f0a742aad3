#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dfsq/compander.hpp"
#include "dfsq/rng.hpp"

using namespace dfsq;

namespace {

// Independent inversion oracle: plain bisection on a closed-form map,
// bypassing the Compander machinery entirely.
double bisect_oracle(const std::function<double(double)>& w, double u) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (lo + hi);
        (w(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("cumulative of the uniform density is the identity") {
    auto c = Compander::build(
        PointDensity::from_callable([](double) { return 1.0; }));
    for (double x : {0.0, 0.1, 0.37, 0.5, 0.93, 1.0})
        CHECK(c.w(x) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("lambda = 2x integrates to w = x^2") {
    auto c = Compander::build(
        PointDensity::from_callable([](double x) { return 2.0 * x; }));
    for (double x : {0.1, 0.25, 0.5, 0.77, 0.99})
        CHECK(std::fabs(c.w(x) - x * x) < 1e-9);
}

TEST_CASE("lambda = (7/3) x^{4/3} integrates to w = x^{7/3}") {
    auto c = Compander::build(PointDensity::from_callable(
        [](double x) { return 7.0 / 3.0 * std::pow(x, 4.0 / 3.0); }));
    for (double x : {0.05, 0.3, 0.5, 0.8, 0.999})
        CHECK(std::fabs(c.w(x) - std::pow(x, 7.0 / 3.0)) < 1e-9);
}

TEST_CASE("uniform quantizer boundaries and codewords at K = 4") {
    auto q = CompandingQuantizer::uniform(4);
    std::vector<double> eb{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> ec{0.125, 0.375, 0.625, 0.875};
    for (int i = 0; i <= 4; ++i)
        CHECK(q.boundaries()[i] == doctest::Approx(eb[i]));
    for (int i = 0; i < 4; ++i)
        CHECK(q.codewords()[i] == doctest::Approx(ec[i]));
}

TEST_CASE("w = x^{7/3} quantizer matches the closed form and the oracle") {
    auto w = [](double x) { return std::pow(x, 7.0 / 3.0); };
    auto c = Compander::build(PointDensity::from_callable(
        [](double x) { return 7.0 / 3.0 * std::pow(x, 4.0 / 3.0); }));
    auto q = CompandingQuantizer::build(c, 4);
    for (int i = 1; i <= 4; ++i) {
        double beta = q.codewords()[i - 1];
        double expect = std::pow((2.0 * i - 1.0) / 8.0, 3.0 / 7.0);
        CHECK(std::fabs(beta - expect) < 1e-9);
        CHECK(std::fabs(beta - bisect_oracle(w, (2.0 * i - 1.0) / 8.0)) < 1e-9);
        CHECK(std::fabs(w(q.boundaries()[i]) - double(i) / 4.0) < 1e-9);
    }
}

TEST_CASE("w = x^2 splits [0,1] at sqrt(1/2) for K = 2") {
    auto c = Compander::build(
        PointDensity::from_callable([](double x) { return 2.0 * x; }));
    auto q = CompandingQuantizer::build(c, 2);
    CHECK(q.boundaries()[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-10));
    // 0.5 < sqrt(1/2), so it stays in the first cell.
    CHECK(q.quantize(0.5) == 0);
}

TEST_CASE("cells are right-closed and x = 0 joins the first cell") {
    auto q = CompandingQuantizer::uniform(4);
    CHECK(q.quantize(0.25) == 0);
    CHECK(q.quantize(0.25 + 1e-12) == 1);
    CHECK(q.quantize(0.0) == 0);
    CHECK(q.quantize(1.0) == 3);
    CHECK_THROWS_AS(q.quantize(-0.1), DomainError);
    CHECK_THROWS_AS(q.quantize(1.1), DomainError);
}

TEST_CASE("round trip: reconstruction stays in the quantized cell") {
    auto c = Compander::build(PointDensity::from_callable(
        [](double x) { return 5.0 / 3.0 * std::cbrt(x * x); }));
    auto q = CompandingQuantizer::build(c, 37);
    BatchRng rng(123, 0);
    for (int i = 0; i < 10000; ++i) {
        double x = rng.uniform();
        int cell = q.quantize(x);
        CHECK(q.quantize(q.reconstruct(cell)) == cell);
    }
}

TEST_CASE("cell lengths track (K lambda)^{-1} as K grows") {
    // Smooth positive density: max relative length error shrinks as K
    // doubles from 2^4 to 2^12.
    auto lam = [](double x) { return (1.0 + x) / 1.5; };
    auto c = Compander::build(PointDensity::from_callable(lam));
    double prev = 1e300;
    for (int K = 16; K <= 4096; K *= 4) {
        auto q = CompandingQuantizer::build(c, K);
        double worst = 0.0;
        for (int i = 0; i < K; ++i) {
            double len = q.boundaries()[i + 1] - q.boundaries()[i];
            double beta = q.codewords()[i];
            worst = std::max(worst,
                             std::fabs(len * K * lam(beta) / 1.5 * 1.5 - 1.0));
        }
        CHECK(worst < prev);
        prev = worst;
        if (K == 4096) CHECK(worst < 0.01);
    }
}

TEST_CASE("distributed resolutions multiply to at most K") {
    std::vector<double> alpha{0.5, 0.3, 0.2};
    for (double K : {16.0, 100.0, 1000.0, 65536.0}) {
        auto kj = DistributedQuantizer::marginal_resolutions(
            K, {alpha.data(), alpha.size()});
        double prod = 1.0;
        for (int k : kj) {
            CHECK(k >= 1);
            prod *= double(k);
        }
        CHECK(prod <= K * (1.0 + 1e-9));
    }
}

TEST_CASE("parabolic fold bins x with 3/4 - x") {
    auto w = [](double x) {
        return 64.0 / 25.0 * x * (0.75 - x) + 16.0 / 25.0;
    };
    GeneralizedCompander gc(w, {0.0, 0.375, 1.0});
    auto q = bin_map(gc, 5);
    BatchRng rng(8, 1);
    for (int i = 0; i < 2000; ++i) {
        double x = rng.uniform() * 0.75;
        double mirror = 0.75 - x;
        CHECK(q.quantize(x) == q.quantize(mirror));
    }
}

TEST_CASE("monotone generalized compander reduces to the regular quantizer") {
    GeneralizedCompander gc([](double x) { return x * x; }, {0.0, 1.0});
    auto nr = bin_map(gc, 8);
    auto c = Compander::build(
        PointDensity::from_callable([](double x) { return 2.0 * x; }));
    auto reg = CompandingQuantizer::build(c, 8);
    BatchRng rng(81, 0);
    for (int i = 0; i < 2000; ++i) {
        double x = rng.uniform();
        CHECK(nr.quantize(x) == reg.quantize(x));
        CHECK(nr.cell(nr.quantize(x)).size() == 1);
    }
}

TEST_CASE("tent map at K = 2 pairs the outer quarters") {
    GeneralizedCompander gc(
        [](double x) { return 1.0 - std::fabs(2.0 * x - 1.0); },
        {0.0, 0.5, 1.0});
    auto q = bin_map(gc, 2);
    // Derived by enumerating preimages of (0, 1/2] and (1/2, 1]:
    // outer quarters fold together, the middle half is one cell.
    CHECK(q.quantize(0.1) == q.quantize(0.9));
    CHECK(q.quantize(0.3) == q.quantize(0.6));
    CHECK(q.quantize(0.1) != q.quantize(0.3));
    const auto& outer = q.cell(q.quantize(0.1));
    REQUIRE(outer.size() == 2);
    CHECK(outer[0].lo == doctest::Approx(0.0));
    CHECK(outer[0].hi == doctest::Approx(0.25));
    CHECK(outer[1].lo == doctest::Approx(0.75));
    CHECK(outer[1].hi == doctest::Approx(1.0));
    const auto& mid = q.cell(q.quantize(0.5));
    REQUIRE(mid.size() == 1);
    CHECK(mid[0].lo == doctest::Approx(0.25));
    CHECK(mid[0].hi == doctest::Approx(0.75));
}

TEST_CASE("discontinuous pieces are rejected") {
    auto w = [](double x) { return x < 0.5 ? x : x - 0.2; };
    CHECK_THROWS_AS(GeneralizedCompander(w, {0.0, 0.5, 1.0}), DomainError);
}

TEST_CASE("pinning a boundary keeps the quantizer valid") {
    auto q = CompandingQuantizer::uniform(5);
    q.pin_boundary(0.5);
    bool found = false;
    for (double b : q.boundaries())
        if (b == 0.5) found = true;
    CHECK(found);
    for (std::size_t i = 0; i + 1 < q.boundaries().size(); ++i)
        CHECK(q.boundaries()[i] < q.boundaries()[i + 1]);
}
