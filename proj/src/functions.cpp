#include "dfsq/functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dfsq/parallel.hpp"
#include "dfsq/quadrature.hpp"
#include "dfsq/rng.hpp"

namespace dfsq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double binomial(int n, int k) {
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                    std::lgamma(n - k + 1.0));
}

}  // namespace

FunctionModel make_linear(std::vector<double> coeffs) {
    FunctionModel g;
    g.n = int(coeffs.size());
    g.name = "linear";
    auto a = std::make_shared<std::vector<double>>(std::move(coeffs));
    g.eval = [a](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < a->size(); ++i) s += (*a)[i] * x[i];
        return s;
    };
    g.partial = [a](int j, std::span<const double>) { return (*a)[j]; };
    g.closed_gamma = [a](int j, const SourceModel&)
        -> std::optional<std::function<double(double)>> {
        double c = std::fabs((*a)[j]);
        return std::function<double(double)>([c](double) { return c; });
    };
    g.partial_bounds = [a](int j, std::span<const double>,
                           std::span<const double>) {
        double c = std::fabs((*a)[j]);
        return PartialBounds{c, c, true};
    };
    double b = 0.0;
    for (double c : *a) b = std::max(b, std::fabs(c));
    g.gradient_bound = b;
    return g;
}

FunctionModel make_square() {
    FunctionModel g;
    g.n = 1;
    g.name = "square";
    g.eval = [](std::span<const double> x) { return x[0] * x[0]; };
    g.partial = [](int, std::span<const double> x) { return 2.0 * x[0]; };
    g.closed_gamma = [](int, const SourceModel&)
        -> std::optional<std::function<double(double)>> {
        return std::function<double(double)>(
            [](double x) { return 2.0 * x; });
    };
    g.partial_bounds = [](int, std::span<const double> lo,
                          std::span<const double> hi) {
        return PartialBounds{2.0 * lo[0], 2.0 * hi[0], true};
    };
    g.gradient_bound = 2.0;
    return g;
}

FunctionModel make_max(int n) {
    if (n < 1) throw ConfigError("max needs n >= 1");
    FunctionModel g;
    g.n = n;
    g.name = "max";
    g.eval = [](std::span<const double> x) {
        return *std::max_element(x.begin(), x.end());
    };
    g.partial = [](int j, std::span<const double> x) {
        double m = *std::max_element(x.begin(), x.end());
        int hits = 0;
        for (double v : x)
            if (v == m) ++hits;
        if (hits > 1) return kNaN;  // tie: derivative undefined
        return x[j] == m ? 1.0 : 0.0;
    };
    g.closed_gamma = [n](int j, const SourceModel& src)
        -> std::optional<std::function<double(double)>> {
        if (!src.independent()) return std::nullopt;
        // gamma_j(x)^2 = P{all others below x} = prod_{i != j} F_i(x).
        std::vector<const Marginal*> others;
        for (int i = 0; i < n; ++i)
            if (i != j) others.push_back(&src.marginal(i));
        return std::function<double(double)>([others](double x) {
            double p = 1.0;
            for (auto* m : others) p *= m->cdf(x);
            return std::sqrt(p);
        });
    };
    g.partial_bounds = [n](int j, std::span<const double> lo,
                           std::span<const double> hi) {
        double max_lo = 0.0, max_hi = 0.0;
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            max_lo = std::max(max_lo, lo[i]);
            max_hi = std::max(max_hi, hi[i]);
        }
        PartialBounds b;
        b.valid = true;
        b.hi = hi[j] > max_lo ? 1.0 : 0.0;   // x_j can be the max
        b.lo = lo[j] >= max_hi ? 1.0 : 0.0;  // x_j always the max
        return b;
    };
    g.gradient_bound = 1.0;
    return g;
}

FunctionModel make_median(int n) {
    if (n < 1 || n % 2 == 0) throw ConfigError("median needs odd n");
    FunctionModel g;
    g.n = n;
    g.name = "median";
    g.eval = [n](std::span<const double> x) {
        std::vector<double> tmp(x.begin(), x.end());
        auto mid = tmp.begin() + n / 2;
        std::nth_element(tmp.begin(), mid, tmp.end());
        return *mid;
    };
    g.partial = [n](int j, std::span<const double> x) {
        std::vector<double> tmp(x.begin(), x.end());
        auto mid = tmp.begin() + n / 2;
        std::nth_element(tmp.begin(), mid, tmp.end());
        double m = *mid;
        int hits = 0;
        for (double v : x)
            if (v == m) ++hits;
        if (hits > 1) return kNaN;
        return x[j] == m ? 1.0 : 0.0;
    };
    g.closed_gamma = [n](int j, const SourceModel& src)
        -> std::optional<std::function<double(double)>> {
        if (!src.independent()) return std::nullopt;
        // Identical marginals assumed: P{median = X_j | X_j = x} is the
        // binomial probability of exactly m of 2m others below x.
        for (int i = 1; i < n; ++i)
            if (src.marginal(i).kind() != src.marginal(0).kind())
                return std::nullopt;
        const Marginal* f = &src.marginal(j);
        int m = n / 2;
        double c = binomial(2 * m, m);
        return std::function<double(double)>([f, m, c](double x) {
            double F = f->cdf(x);
            return std::sqrt(c * std::pow(F, m) * std::pow(1.0 - F, m));
        });
    };
    g.gradient_bound = 1.0;
    return g;
}

FunctionModel make_min_clip() {
    FunctionModel g;
    g.n = 1;
    g.name = "min_clip";
    g.eval = [](std::span<const double> x) { return std::min(x[0], 0.5); };
    g.partial = [](int, std::span<const double> x) {
        if (x[0] == 0.5) return kNaN;
        return x[0] < 0.5 ? 1.0 : 0.0;
    };
    g.closed_gamma = [](int, const SourceModel&)
        -> std::optional<std::function<double(double)>> {
        return std::function<double(double)>(
            [](double x) { return x < 0.5 ? 1.0 : 0.0; });
    };
    g.partial_bounds = [](int, std::span<const double> lo,
                          std::span<const double> hi) {
        PartialBounds b;
        b.valid = true;
        b.hi = lo[0] < 0.5 ? 1.0 : 0.0;
        b.lo = hi[0] <= 0.5 ? 1.0 : 0.0;
        return b;
    };
    g.gradient_bound = 1.0;
    return g;
}

FunctionModel make_quadrant(double L) {
    if (L <= 0.0) throw ConfigError("quadrant needs L > 0");
    FunctionModel g;
    g.n = 2;
    g.name = "quadrant";
    // dg/dx2 = 1 everywhere; dg/dx1 = L on the diagonal quadrants
    // (x1, x2 on the same side of 1/2) and 1 off-diagonal; g(0,0) = 0.
    // g jumps across x2 = 1/2, which quantizers handle by pinning a cell
    // boundary there.
    auto slope1 = [L](double x1, double x2) {
        bool lo1 = x1 <= 0.5, lo2 = x2 <= 0.5;
        return lo1 == lo2 ? L : 1.0;
    };
    g.eval = [L](std::span<const double> x) {
        double x1 = x[0], x2 = x[1];
        double lo_seg = std::min(x1, 0.5);
        double hi_seg = std::max(0.0, x1 - 0.5);
        if (x2 <= 0.5) return x2 + L * lo_seg + hi_seg;
        return x2 + lo_seg + L * hi_seg;
    };
    g.partial = [slope1](int j, std::span<const double> x) {
        if (x[1] == 0.5) return kNaN;
        if (j == 1) return 1.0;
        if (x[0] == 0.5) return kNaN;
        return slope1(x[0], x[1]);
    };
    g.closed_gamma = [L](int j, const SourceModel& src)
        -> std::optional<std::function<double(double)>> {
        if (!src.independent()) return std::nullopt;
        if (j == 1)
            return std::function<double(double)>([](double) { return 1.0; });
        // Averaging over X_2: each slope occurs with probability F_2(1/2)
        // or its complement.
        double p = src.marginal(1).cdf(0.5);
        return std::function<double(double)>([L, p](double x) {
            double same = x <= 0.5 ? p : 1.0 - p;
            return std::sqrt(same * L * L + (1.0 - same));
        });
    };
    g.partial_bounds = [L, slope1](int j, std::span<const double> lo,
                                   std::span<const double> hi) {
        PartialBounds b;
        b.valid = true;
        if (j == 1) {
            b.lo = b.hi = 1.0;
            return b;
        }
        double s00 = slope1(lo[0], lo[1]), s01 = slope1(lo[0], hi[1]);
        double s10 = slope1(hi[0], lo[1]), s11 = slope1(hi[0], hi[1]);
        b.lo = std::min({s00, s01, s10, s11});
        b.hi = std::max({s00, s01, s10, s11});
        return b;
    };
    g.gradient_bound = std::max(1.0, L);
    return g;
}

FunctionModel make_sep_parabola() {
    FunctionModel g;
    g.n = 2;
    g.name = "sep_parabola";
    g.eval = [](std::span<const double> x) {
        return x[0] * (0.75 - x[0]) * (1.0 - x[1]);
    };
    g.partial = [](int j, std::span<const double> x) {
        if (j == 0) return (0.75 - 2.0 * x[0]) * (1.0 - x[1]);
        return -x[0] * (0.75 - x[0]);
    };
    g.closed_gamma = [](int j, const SourceModel& src)
        -> std::optional<std::function<double(double)>> {
        if (!src.independent()) return std::nullopt;
        if (j == 0) {
            const Marginal* f2 = &src.marginal(1);
            double m2 = integrate(
                [f2](double t) {
                    return (1.0 - t) * (1.0 - t) * f2->pdf(t);
                },
                0.0, 1.0, 1e-12);
            double root = std::sqrt(m2);
            return std::function<double(double)>([root](double x) {
                return std::fabs(0.75 - 2.0 * x) * root;
            });
        }
        const Marginal* f1 = &src.marginal(0);
        double m1 = integrate(
            [f1](double t) {
                double u = t * (0.75 - t);
                return u * u * f1->pdf(t);
            },
            0.0, 1.0, 1e-12);
        double root = std::sqrt(m1);
        return std::function<double(double)>([root](double) { return root; });
    };
    g.gradient_bound = 1.25;
    return g;
}

FunctionModel make_function(const std::string& name, int n,
                            const std::vector<double>& params) {
    if (name == "linear") {
        if (!params.empty()) return make_linear(params);
        if (n >= 1) return make_linear(std::vector<double>(std::size_t(n), 1.0));
        throw ConfigError("linear needs coefficients or n");
    }
    if (name == "square") return make_square();
    if (name == "max") return make_max(n > 0 ? n : 2);
    if (name == "median") return make_median(n > 0 ? n : 3);
    if (name == "min_clip") return make_min_clip();
    if (name == "quadrant")
        return make_quadrant(params.empty() ? 2.0 : params[0]);
    if (name == "sep_parabola") return make_sep_parabola();
    throw ConfigError("unknown function: " + name);
}

// ---------------------------------------------------------------------------
// Sensitivity profiles

namespace {

SensitivityProfile tabulate_closed(const std::function<double(double)>& gamma,
                                   int j, std::size_t nodes) {
    SensitivityProfile p;
    p.j = j;
    p.closed_form = true;
    p.gamma = GridFunction::tabulate(
        [&gamma](double x) {
            double v = gamma(x);
            return v < kGammaClamp ? 0.0 : v;
        },
        nodes);
    p.se = p.gamma;
    std::fill(p.se.v.begin(), p.se.v.end(), 0.0);
    return p;
}

// Shared Monte Carlo core: conditional mean of |g_j|^2 given X_j = x on a
// grid. `others` holds the conditioning draws of the remaining variables
// (common random numbers across grid points).
SensitivityProfile mc_profile(const FunctionModel& g, int j,
                              std::size_t nodes,
                              const std::vector<double>& others,
                              std::size_t count, int threads) {
    SensitivityProfile p;
    p.j = j;
    p.gamma.v.assign(nodes, 0.0);
    p.se.v.assign(nodes, 0.0);
    std::size_t width = std::size_t(g.n - 1);
    parallel_batches(
        int(nodes),
        [&](int gi) {
            double x = double(gi) / double(nodes - 1);
            std::vector<double> point(std::size_t(g.n), 0.0);
            double sum = 0.0, sumsq = 0.0;
            std::size_t used = 0;
            for (std::size_t s = 0; s < count; ++s) {
                std::size_t k = 0;
                for (int d = 0; d < g.n; ++d) {
                    if (d == j)
                        point[std::size_t(d)] = x;
                    else
                        point[std::size_t(d)] = others[s * width + k++];
                }
                double gj = g.partial(j, point);
                if (std::isnan(gj)) continue;  // measure-zero undefined set
                double v = gj * gj;
                sum += v;
                sumsq += v * v;
                ++used;
            }
            if (used == 0) {
                p.gamma.v[std::size_t(gi)] = 0.0;
                p.se.v[std::size_t(gi)] = 0.0;
                return;
            }
            double mean = sum / double(used);
            double var = std::max(0.0, sumsq / double(used) - mean * mean);
            double se2 = std::sqrt(var / double(used));
            double gamma = std::sqrt(std::max(0.0, mean));
            p.gamma.v[std::size_t(gi)] = gamma < kGammaClamp ? 0.0 : gamma;
            // delta method: se(sqrt m) = se(m) / (2 sqrt m)
            p.se.v[std::size_t(gi)] =
                gamma > kGammaClamp ? se2 / (2.0 * gamma) : std::sqrt(se2);
        },
        threads);
    for (double s : p.se.v) p.max_se = std::max(p.max_se, s);
    p.warn_noisy = p.max_se > 0.05;
    return p;
}

}  // namespace

SensitivityProfile sensitivity_profile(const FunctionModel& g,
                                       const SourceModel& src, int j,
                                       std::size_t grid_nodes,
                                       std::size_t mc_samples,
                                       std::uint64_t seed, int threads) {
    if (j < 0 || j >= g.n) throw DomainError("variable index out of range");
    if (g.closed_gamma) {
        if (auto closed = g.closed_gamma(j, src))
            return tabulate_closed(*closed, j, grid_nodes);
    }
    if (g.n == 1) {
        // No conditioning variables: gamma(x) = |g'(x)| directly.
        SensitivityProfile p;
        p.j = 0;
        p.gamma = GridFunction::tabulate(
            [&](double x) {
                double d = g.partial(0, std::span<const double>(&x, 1));
                if (std::isnan(d)) return 0.0;
                double a = std::fabs(d);
                return a < kGammaClamp ? 0.0 : a;
            },
            grid_nodes);
        p.se = p.gamma;
        std::fill(p.se.v.begin(), p.se.v.end(), 0.0);
        return p;
    }
    std::vector<double> others;
    if (src.independent()) {
        others = src.sample_others_given(j, 0.5, mc_samples, seed);
        return mc_profile(g, j, grid_nodes, others, mc_samples, threads);
    }
    // Dependent grid joint (n <= 3): conditional slice per grid point.
    // Experimental path; draws cannot be shared across grid points.
    SensitivityProfile p;
    p.j = j;
    p.gamma.v.assign(grid_nodes, 0.0);
    p.se.v.assign(grid_nodes, 0.0);
    parallel_batches(int(grid_nodes), [&](int gi) {
        double x = double(gi) / double(grid_nodes - 1);
        auto cond = src.sample_others_given(j, x, mc_samples, seed + gi);
        std::vector<double> point(std::size_t(g.n), 0.0);
        double sum = 0.0, sumsq = 0.0;
        std::size_t used = 0, width = std::size_t(g.n - 1);
        for (std::size_t s = 0; s < mc_samples; ++s) {
            std::size_t k = 0;
            for (int d = 0; d < g.n; ++d)
                point[std::size_t(d)] =
                    (d == j) ? x : cond[s * width + k++];
            double gj = g.partial(j, point);
            if (std::isnan(gj)) continue;
            sum += gj * gj;
            sumsq += gj * gj * gj * gj;
            ++used;
        }
        if (used == 0) return;
        double mean = sum / double(used);
        double var = std::max(0.0, sumsq / double(used) - mean * mean);
        double gamma = std::sqrt(std::max(0.0, mean));
        p.gamma.v[std::size_t(gi)] = gamma < kGammaClamp ? 0.0 : gamma;
        p.se.v[std::size_t(gi)] =
            gamma > kGammaClamp
                ? std::sqrt(var / double(used)) / (2.0 * gamma)
                : 0.0;
    });
    for (double s : p.se.v) p.max_se = std::max(p.max_se, s);
    p.warn_noisy = p.max_se > 0.05;
    return p;
}

SensitivityProfile conditional_sensitivity_profile(
    const FunctionModel& g, const SourceModel& src, int j,
    const ThresholdEvent& event, int y, std::size_t grid_nodes,
    std::size_t mc_samples, std::uint64_t seed) {
    if (!src.independent())
        throw ConfigError("conditional profiles need independent sources");
    if (event.var == j)
        throw DomainError("partition variable must differ from j");
    const Marginal& mv = src.marginal(event.var);
    double pcut = mv.cdf(event.cut);
    double py = (y == 1) ? pcut : 1.0 - pcut;
    if (py <= 0.0) throw DomainError("zero-probability partition branch");

    // Draw the partition variable from its truncated marginal, the rest from
    // their marginals.
    std::size_t width = std::size_t(g.n - 1);
    std::vector<double> others(mc_samples * width);
    BatchRng rng(seed, 0xC0DE);
    for (std::size_t s = 0; s < mc_samples; ++s) {
        std::size_t k = 0;
        for (int d = 0; d < g.n; ++d) {
            if (d == j) continue;
            double u = rng.uniform();
            double x;
            if (d == event.var)
                x = (y == 1) ? mv.inv_cdf(u * pcut)
                             : mv.inv_cdf(pcut + u * (1.0 - pcut));
            else
                x = src.marginal(d).inv_cdf(u);
            others[s * width + k++] = x;
        }
    }
    SensitivityProfile p;
    p.j = j;
    p.gamma.v.assign(grid_nodes, 0.0);
    p.se.v.assign(grid_nodes, 0.0);
    std::vector<double> point(std::size_t(g.n), 0.0);
    for (std::size_t gi = 0; gi < grid_nodes; ++gi) {
        double x = double(gi) / double(grid_nodes - 1);
        double sum = 0.0, sumsq = 0.0;
        std::size_t used = 0;
        for (std::size_t s = 0; s < mc_samples; ++s) {
            std::size_t k = 0;
            for (int d = 0; d < g.n; ++d)
                point[std::size_t(d)] = (d == j) ? x : others[s * width + k++];
            double gj = g.partial(j, point);
            if (std::isnan(gj)) continue;
            sum += gj * gj;
            sumsq += gj * gj * gj * gj;
            ++used;
        }
        if (used == 0) continue;
        double mean = sum / double(used);
        double var = std::max(0.0, sumsq / double(used) - mean * mean);
        double gamma = std::sqrt(std::max(0.0, mean));
        p.gamma.v[gi] = gamma < kGammaClamp ? 0.0 : gamma;
        p.se.v[gi] = gamma > kGammaClamp
                         ? std::sqrt(var / double(used)) / (2.0 * gamma)
                         : 0.0;
    }
    for (double s : p.se.v) p.max_se = std::max(p.max_se, s);
    p.warn_noisy = p.max_se > 0.05;
    return p;
}

}  // namespace dfsq
