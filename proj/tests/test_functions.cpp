#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dfsq/functions.hpp"

using namespace dfsq;

namespace {

double lchoose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
           std::lgamma(n - k + 1.0);
}

}  // namespace

TEST_CASE("max sensitivity: gamma^2 = x^{n-1} under iid uniform") {
    for (int n : {2, 3, 5}) {
        auto g = make_max(n);
        auto src = SourceModel::iid(Marginal::uniform(), n);
        auto p = sensitivity_profile(g, src, 0, 257);
        CHECK(p.closed_form);
        // Query at tabulation nodes; between nodes the profile is the
        // linear interpolant.
        for (double x : {0.25, 0.5, 0.75}) {
            double expect = std::pow(x, (n - 1) / 2.0);
            CHECK(p(x) == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("max closed form agrees with Monte Carlo within 3 sigma") {
    auto g = make_max(3);
    auto src = SourceModel::iid(Marginal::uniform(), 3);
    auto closed = sensitivity_profile(g, src, 0, 65);
    // Disable the closed form to force the Monte Carlo path.
    auto g_mc = g;
    g_mc.closed_gamma = nullptr;
    auto mc = sensitivity_profile(g_mc, src, 0, 65, 1 << 16, 99);
    CHECK_FALSE(mc.closed_form);
    int checked = 0;
    for (std::size_t i = 4; i < mc.gamma.size(); i += 8) {
        double se = std::max(mc.se.v[i], 1e-4);
        CHECK(std::fabs(mc.gamma.v[i] - closed.gamma.v[i]) < 3.5 * se + 5e-3);
        ++checked;
    }
    CHECK(checked > 5);
}

TEST_CASE("linear sensitivity is the coefficient magnitude") {
    auto g = make_linear({1.5, -2.0, 0.5});
    auto src = SourceModel::iid(Marginal::uniform(), 3);
    for (int j = 0; j < 3; ++j) {
        auto p = sensitivity_profile(g, src, j, 33);
        double expect = std::fabs(j == 0 ? 1.5 : (j == 1 ? -2.0 : 0.5));
        for (double x : {0.1, 0.6})
            CHECK(p(x) == doctest::Approx(expect));
    }
}

TEST_CASE("median sensitivity: gamma^2 = C(2m,m) x^m (1-x)^m") {
    for (int n : {3, 5, 7}) {
        int m = n / 2;
        auto g = make_median(n);
        auto src = SourceModel::iid(Marginal::uniform(), n);
        auto p = sensitivity_profile(g, src, 0, 129);
        double c = std::exp(lchoose(2 * m, m));
        for (double x : {0.25, 0.5, 0.75}) {
            double expect =
                std::sqrt(c * std::pow(x, m) * std::pow(1 - x, m));
            CHECK(p(x) == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("min_clip sensitivity vanishes on the clipped half") {
    auto g = make_min_clip();
    auto src = SourceModel::iid(Marginal::uniform(), 1);
    auto p = sensitivity_profile(g, src, 0, 1025);
    CHECK(p(0.2) == doctest::Approx(1.0));
    CHECK(p(0.7) == 0.0);
    CHECK(p(0.99) == 0.0);
}

TEST_CASE("square function: gamma = 2x regardless of the source") {
    auto g = make_square();
    for (auto m : {Marginal::uniform(), Marginal::power(2)}) {
        auto src = SourceModel::iid(m, 1);
        auto p = sensitivity_profile(g, src, 0, 65);
        CHECK(p(0.3) == doctest::Approx(0.6));
    }
}

TEST_CASE("quadrant conditional profiles switch between 1 and L") {
    double L = 4.0;
    auto g = make_quadrant(L);
    auto src = SourceModel::iid(Marginal::uniform(), 2);
    ThresholdEvent ev{1, 0.5};
    // Y = 0 means X_2 > 1/2: slope 1 below x = 1/2, slope L above.
    auto p0 = conditional_sensitivity_profile(g, src, 0, ev, 0, 129, 1 << 12);
    CHECK(p0(0.2) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(p0(0.8) == doctest::Approx(L).epsilon(1e-6));
    auto p1 = conditional_sensitivity_profile(g, src, 0, ev, 1, 129, 1 << 12);
    CHECK(p1(0.2) == doctest::Approx(L).epsilon(1e-6));
    CHECK(p1(0.8) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("linear functions have partition-independent conditional profiles") {
    auto g = make_linear({2.0, 3.0});
    auto src = SourceModel::iid(Marginal::uniform(), 2);
    for (double cut : {0.3, 0.5, 0.8}) {
        for (int y : {0, 1}) {
            auto p = conditional_sensitivity_profile(
                g, src, 0, ThresholdEvent{1, cut}, y, 33, 1 << 10);
            CHECK(p(0.4) == doctest::Approx(2.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("conditional max profile matches a brute-force oracle") {
    // g = max, n = 2, Y = 1{X_2 <= 1/2}: for Y = 0, X_2 ~ U(1/2, 1] and
    // gamma^2(x) = P{X_2 <= x | X_2 > 1/2} = max(0, 2x - 1).
    auto g = make_max(2);
    auto src = SourceModel::iid(Marginal::uniform(), 2);
    auto p = conditional_sensitivity_profile(g, src, 0, ThresholdEvent{1, 0.5},
                                             0, 65, 1 << 16, 21);
    for (double x : {0.25, 0.6, 0.8, 0.95}) {
        double expect = std::sqrt(std::max(0.0, 2.0 * x - 1.0));
        CHECK(std::fabs(p(x) - expect) < 0.02);
    }
}

TEST_CASE("law of total expectation ties branches to the full profile") {
    double L = 3.0;
    auto g = make_quadrant(L);
    auto src = SourceModel::iid(Marginal::uniform(), 2);
    ThresholdEvent ev{1, 0.5};
    auto p0 = conditional_sensitivity_profile(g, src, 0, ev, 0, 65, 1 << 12);
    auto p1 = conditional_sensitivity_profile(g, src, 0, ev, 1, 65, 1 << 12);
    auto full = sensitivity_profile(g, src, 0, 65);
    for (double x : {0.1, 0.3, 0.7, 0.9}) {
        double mix = 0.5 * p0(x) * p0(x) + 0.5 * p1(x) * p1(x);
        CHECK(mix == doctest::Approx(full(x) * full(x)).epsilon(1e-6));
    }
}

TEST_CASE("monotone functions keep gamma above the gradient floor") {
    auto g = make_linear({0.7, 0.7});
    auto src = SourceModel::iid(Marginal::uniform(), 2);
    auto p = sensitivity_profile(g, src, 0, 65);
    for (std::size_t i = 0; i < p.gamma.size(); ++i)
        CHECK(p.gamma.v[i] >= 0.7 - 1e-12);
}

TEST_CASE("partial bounds cover boxes for the built-ins") {
    auto g = make_max(2);
    double lo[2] = {0.6, 0.1}, hi[2] = {0.9, 0.4};
    auto b = g.partial_bounds(0, {lo, 2}, {hi, 2});
    CHECK(b.valid);
    CHECK(b.lo == 1.0);  // x_0 always the max on this box
    CHECK(b.hi == 1.0);
    auto b2 = g.partial_bounds(1, {lo, 2}, {hi, 2});
    CHECK(b2.lo == 0.0);
    CHECK(b2.hi == 0.0);
}

TEST_CASE("registry rejects unknown names and bad parameters") {
    CHECK_THROWS_AS(make_function("nope"), ConfigError);
    CHECK_THROWS_AS(make_median(4), ConfigError);
    CHECK_THROWS_AS(make_quadrant(-1.0), ConfigError);
}
