#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dfsq/design.hpp"
#include "dfsq/quadrature.hpp"
#include "dfsq/rng.hpp"

using namespace dfsq;

namespace {

// Brute-force rate-split oracle: nested grid refinement over the rate
// simplex (total fixed, entries may go negative).
double brute_force_allocation(const std::vector<double>& c, double rbar,
                              double step_goal = 1e-5) {
    std::size_t n = c.size();
    double budget = rbar * double(n);
    auto cost = [&](const std::vector<double>& r) {
        double d = 0.0, used = 0.0;
        for (std::size_t j = 0; j + 1 < n; ++j) used += r[j];
        for (std::size_t j = 0; j + 1 < n; ++j)
            d += c[j] * std::exp2(-2.0 * r[j]);
        d += c[n - 1] * std::exp2(-2.0 * (budget - used));
        return d;
    };
    std::vector<double> center(n - 1, rbar);
    double radius = std::fabs(rbar) + 6.0;
    double best = cost(center);
    while (radius > step_goal) {
        const int span = 10;
        std::vector<double> probe = center, best_probe = center;
        std::vector<int> idx(n - 1, -span);
        while (true) {
            for (std::size_t j = 0; j + 1 < n; ++j)
                probe[j] = center[j] + radius * double(idx[j]) / span;
            double d = cost(probe);
            if (d < best) {
                best = d;
                best_probe = probe;
            }
            std::size_t j = 0;
            while (j < n - 1 && ++idx[j] > span) idx[j] = -span, ++j;
            if (j == n - 1) break;
        }
        center = best_probe;
        radius /= 5.0;
    }
    return best;
}

GridFunction smooth_noise(std::uint64_t seed, std::size_t nodes) {
    BatchRng rng(seed, 0);
    double a1 = rng.uniform() - 0.5, a2 = rng.uniform() - 0.5;
    double a3 = rng.uniform() - 0.5;
    return GridFunction::tabulate(
        [&](double x) {
            return a1 * std::sin(2 * M_PI * x) +
                   a2 * std::cos(4 * M_PI * x) + a3 * std::sin(6 * M_PI * x);
        },
        nodes);
}

double quasinorm_13(const GridFunction& f) {
    GridFunction c = f;
    for (auto& v : c.v) v = std::cbrt(v);
    double r = c.integral();
    return r * r * r;
}

}  // namespace

TEST_CASE("fixed-rate density: square function on a uniform source") {
    auto gamma = [](double x) { return 2.0 * x; };
    auto lam = fixed_rate_density(gamma, Marginal::uniform());
    // (gamma^2 f)^{1/3} normalized = (5/3) x^{2/3}
    for (double x : {0.1, 0.5, 0.9})
        CHECK(lam(x) ==
              doctest::Approx(5.0 / 3.0 * std::cbrt(x * x)).epsilon(1e-9));
}

TEST_CASE("fixed-rate density: square function on the cubic source") {
    auto gamma = [](double x) { return 2.0 * x; };
    auto lam = fixed_rate_density(gamma, Marginal::power(2));
    for (double x : {0.2, 0.6, 0.95})
        CHECK(lam(x) == doctest::Approx(7.0 / 3.0 * std::pow(x, 4.0 / 3.0))
                            .epsilon(1e-9));
}

TEST_CASE("fixed-rate density: constant sensitivity gives the cube root rule") {
    auto gamma = [](double) { return 1.0; };
    auto lam = fixed_rate_density(gamma, Marginal::power(2));
    double z = integrate([](double x) { return std::cbrt(3.0 * x * x); }, 0, 1,
                         1e-12);
    for (double x : {0.3, 0.7})
        CHECK(lam(x) == doctest::Approx(std::cbrt(3 * x * x) / z).epsilon(1e-9));
}

TEST_CASE("variable-rate density follows the sensitivity profile") {
    auto lam = variable_rate_density(
        std::function<double(double)>([](double x) { return 2.0 * x; }));
    for (double x : {0.2, 0.8})
        CHECK(lam(x) == doctest::Approx(2.0 * x).epsilon(1e-9));

    // Constant sensitivity: the uniform quantizer is optimal.
    auto flat = variable_rate_density(
        std::function<double(double)>([](double) { return 3.0; }));
    CHECK(flat(0.4) == doctest::Approx(1.0).epsilon(1e-9));

    for (int n : {2, 4, 8}) {
        auto gm = [n](double x) { return std::pow(x, (n - 1) / 2.0); };
        auto l = variable_rate_density(std::function<double(double)>(gm));
        for (double x : {0.3, 0.9})
            CHECK(l(x) == doctest::Approx((n + 1) / 2.0 *
                                          std::pow(x, (n - 1) / 2.0))
                              .epsilon(1e-9));
    }
}

TEST_CASE("distortion constants for the square example") {
    auto u = Marginal::uniform();
    auto vc = variable_constants(
        std::function<double(double)>([](double x) { return 2.0 * x; }), u);

    double c_fr = distortion_constant(Regime::Fixed, vc);
    CHECK(c_fr == doctest::Approx(108.0 / 125.0).epsilon(1e-9));
    CHECK(c_fr / 12.0 == doctest::Approx(9.0 / 125.0).epsilon(1e-9));

    // E[log2 2X] = 1 - 1/ln 2 and h = 0 give 4 e^{-2}.
    CHECK(vc.e_log2_gamma ==
          doctest::Approx(1.0 - 1.0 / std::log(2.0)).epsilon(1e-8));
    double c_vr = distortion_constant(Regime::Variable, vc);
    CHECK(c_vr == doctest::Approx(4.0 * std::exp(-2.0)).epsilon(1e-7));
    CHECK(c_vr / 12.0 == doctest::Approx(std::exp(-2.0) / 3.0).epsilon(1e-7));
}

TEST_CASE("identity function: unit constant in both regimes") {
    auto u = Marginal::uniform();
    auto vc = variable_constants(
        std::function<double(double)>([](double) { return 1.0; }), u);
    CHECK(distortion_constant(Regime::Fixed, vc) ==
          doctest::Approx(1.0).epsilon(1e-10));
    CHECK(distortion_constant(Regime::Variable, vc) ==
          doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("rate split: symmetric constants split evenly") {
    std::vector<double> c{1.0, 1.0};
    auto a = allocate(c, 3.0);
    CHECK(a.rate[0] == doctest::Approx(3.0));
    CHECK(a.rate[1] == doctest::Approx(3.0));
    CHECK(a.distortion == doctest::Approx(2.0 * std::exp2(-6.0)));
    CHECK_FALSE(a.has_nonpositive);
}

TEST_CASE("rate split: c = (1,4) shifts half a bit each way") {
    std::vector<double> c{1.0, 4.0};
    auto a = allocate(c, 3.0);
    CHECK(a.rate[0] == doctest::Approx(2.5));
    CHECK(a.rate[1] == doctest::Approx(3.5));
    CHECK(a.distortion == doctest::Approx(2.0 * 2.0 * std::exp2(-6.0)));
    // Brute-force sweep at 1e-3 step confirms the optimum.
    double brute = brute_force_allocation(c, 3.0, 1e-3);
    CHECK(a.distortion == doctest::Approx(brute).epsilon(1e-5));
}

TEST_CASE("rate split: single variable keeps the whole budget") {
    std::vector<double> c{0.7};
    auto a = allocate(c, 5.0);
    CHECK(a.rate[0] == doctest::Approx(5.0));
    CHECK(a.distortion == doctest::Approx(0.7 * std::exp2(-10.0)));
}

TEST_CASE("rate split matches brute force for n up to 4") {
    BatchRng rng(2024, 0);
    for (int n = 2; n <= 4; ++n) {
        for (int rep = 0; rep < 3; ++rep) {
            std::vector<double> c;
            for (int j = 0; j < n; ++j)
                c.push_back(std::exp2(4.0 * rng.uniform() - 2.0));
            auto a = allocate(c, 3.0);
            double brute = brute_force_allocation(c, 3.0);
            CHECK(std::fabs(a.distortion - brute) < 1e-6);
        }
    }
}

TEST_CASE("negative rates are reported, and clipping re-splits the budget") {
    std::vector<double> c{1.0, 1e-9};
    auto a = allocate(c, 1.0);
    CHECK(a.has_nonpositive);
    auto clipped = allocate(c, 1.0, /*clip_nonnegative=*/true);
    CHECK(clipped.rate[1] == 0.0);
    CHECK(clipped.rate[0] == doctest::Approx(2.0));
    CHECK(clipped.distortion <= a.distortion + 1e-12);
}

TEST_CASE("full design: maximum under iid uniform sources") {
    for (int n : {1, 2, 4, 8}) {
        auto g = make_max(n);
        auto src = SourceModel::iid(Marginal::uniform(), n);
        DesignProblem dp;
        dp.source = &src;
        dp.function = &g;

        dp.regime = Regime::Fixed;
        auto fixed = design(dp);
        double rbar = 8.0;
        double expect_fr = double(n) / 12.0 * std::pow(3.0 / (n + 2), 3.0) *
                           std::exp2(-2.0 * rbar);
        CHECK(fixed.hr_distortion(rbar * n) ==
              doctest::Approx(expect_fr).epsilon(1e-7));

        dp.regime = Regime::Variable;
        auto var = design(dp);
        // Entropy-matched constant: 2^{2 E[log gamma]} = e^{-(n-1)}.
        double expect_vr = double(n) / 12.0 * std::exp(1.0 - n) *
                           std::exp2(-2.0 * rbar);
        CHECK(var.hr_distortion(rbar * n) ==
              doctest::Approx(expect_vr).epsilon(1e-6));

        if (n == 1) {
            // The max of one variable is the identity: ordinary uniform
            // quantization, D = 2^{-2R}/12 in both regimes.
            CHECK(fixed.hr_distortion(rbar) ==
                  doctest::Approx(std::exp2(-2 * rbar) / 12).epsilon(1e-9));
            CHECK(var.hr_distortion(rbar) ==
                  doctest::Approx(std::exp2(-2 * rbar) / 12).epsilon(1e-9));
        }
    }
}

TEST_CASE("slepian-wolf design equals variable rate for independent sources") {
    auto g = make_max(2);
    auto src = SourceModel::iid(Marginal::power(1), 2);
    DesignProblem dp;
    dp.source = &src;
    dp.function = &g;
    dp.regime = Regime::Variable;
    auto vr = design(dp);
    dp.regime = Regime::SlepianWolf;
    auto sw = design(dp);
    CHECK(sw.hr_distortion(16.0) ==
          doctest::Approx(vr.hr_distortion(16.0)).epsilon(1e-7));
}

TEST_CASE("slepian-wolf gains exactly the multiinformation on a grid joint") {
    // Correlated 2-D step density; marginals stay uniform.
    const int m = 16;
    std::vector<double> w;
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            double xa = (a + 0.5) / m, xb = (b + 0.5) / m;
            w.push_back(1.0 + 0.9 * (2 * xa - 1) * (2 * xb - 1));
        }
    auto src = SourceModel::joint(GridJoint(2, m, w));
    double multi = src.marginal(0).entropy_bits() +
                   src.marginal(1).entropy_bits() - src.joint_entropy_bits();
    CHECK(multi > 0.01);

    auto g = make_linear({1.0, 1.0});
    DesignProblem dp;
    dp.source = &src;
    dp.function = &g;
    dp.regime = Regime::Variable;
    auto vr = design(dp);
    dp.regime = Regime::SlepianWolf;
    auto sw = design(dp);
    // Same distortion at rates differing by the multiinformation.
    double R = 14.0;
    CHECK(sw.hr_distortion(R - multi) ==
          doctest::Approx(vr.hr_distortion(R)).epsilon(1e-6));
}

TEST_CASE("designs with dead zones are routed to the don't-care path") {
    auto g = make_min_clip();
    auto src = SourceModel::iid(Marginal::uniform(), 1);
    DesignProblem dp;
    dp.source = &src;
    dp.function = &g;
    dp.regime = Regime::Fixed;
    CHECK_THROWS_AS(design(dp), DontCareRequired);
}

TEST_CASE("cube-root density is a local optimum of the fixed-rate objective") {
    // 20 smooth perturbations of the optimal density never improve the
    // discretized objective beyond rounding.
    const std::size_t nodes = 513;
    auto f = Marginal::power(2);
    auto gamma = [](double x) { return 2.0 * x; };
    GridFunction lam_star = GridFunction::tabulate(
        [&](double x) {
            return 7.0 / 3.0 * std::pow(x, 4.0 / 3.0);
        },
        nodes);
    auto objective = [&](const GridFunction& lam) {
        GridFunction t = lam;
        double z = lam.integral();
        for (std::size_t i = 0; i < t.size(); ++i) {
            double x = t.node(i);
            double l = std::max(lam.v[i] / z, 1e-9);
            t.v[i] = f.pdf(x) * gamma(x) * gamma(x) / (l * l);
        }
        return t.integral();
    };
    double base = objective(lam_star);
    for (int rep = 0; rep < 20; ++rep) {
        GridFunction noise = smooth_noise(500 + rep, nodes);
        GridFunction lam = lam_star;
        for (std::size_t i = 0; i < lam.size(); ++i)
            lam.v[i] = std::max(1e-6, lam.v[i] * (1.0 + 0.05 * noise.v[i]));
        CHECK(objective(lam) >= base - 1e-10);
    }
}

TEST_CASE("sensitivity-matched density is a local optimum of the "
          "variable-rate objective") {
    const std::size_t nodes = 513;
    auto f = Marginal::uniform();
    auto gamma = [](double x) { return std::sqrt(x); };
    GridFunction lam_star =
        GridFunction::tabulate([&](double x) { return 1.5 * std::sqrt(x); },
                               nodes);
    auto objective = [&](const GridFunction& lam) {
        double z = lam.integral();
        GridFunction ratio = lam, logterm = lam;
        for (std::size_t i = 0; i < lam.size(); ++i) {
            double x = lam.node(i);
            double l = std::max(lam.v[i] / z, 1e-12);
            double gm = gamma(x);
            ratio.v[i] = f.pdf(x) * gm * gm / (l * l);
            logterm.v[i] = f.pdf(x) * std::log2(l);
        }
        return ratio.integral() * std::exp2(2.0 * logterm.integral());
    };
    double base = objective(lam_star);
    for (int rep = 0; rep < 20; ++rep) {
        GridFunction noise = smooth_noise(900 + rep, nodes);
        GridFunction lam = lam_star;
        for (std::size_t i = 0; i < lam.size(); ++i)
            lam.v[i] = std::max(1e-6, lam.v[i] * (1.0 + 0.05 * noise.v[i]));
        CHECK(objective(lam) >= base - 1e-10);
    }
}

TEST_CASE("L^{1/3} quasinorm triangle inequality with constant 4") {
    for (int rep = 0; rep < 100; ++rep) {
        BatchRng rng(3000 + rep, 0);
        GridFunction a = GridFunction::tabulate(
            [&](double) { return rng.uniform() + 1e-6; }, 129);
        GridFunction b = GridFunction::tabulate(
            [&](double) { return 2.0 * rng.uniform() + 1e-6; }, 129);
        GridFunction s = a;
        for (std::size_t i = 0; i < s.size(); ++i) s.v[i] += b.v[i];
        CHECK(quasinorm_13(s) <=
              4.0 * (quasinorm_13(a) + quasinorm_13(b)) + 1e-12);
    }
}
