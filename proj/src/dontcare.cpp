#include "dfsq/dontcare.hpp"

#include <algorithm>
#include <cmath>

#include "dfsq/parallel.hpp"
#include "dfsq/quadrature.hpp"
#include "dfsq/rng.hpp"

namespace dfsq {

namespace {

constexpr int kMinRunNodes = 4;
constexpr double kMinIntervalProb = 1e-4;

std::vector<Interval> complement_of(const std::vector<Interval>& zs) {
    std::vector<Interval> active;
    double cursor = 0.0;
    for (const auto& z : zs) {
        if (z.lo > cursor) active.push_back({cursor, z.lo});
        cursor = std::max(cursor, z.hi);
    }
    if (cursor < 1.0) active.push_back({cursor, 1.0});
    return active;
}

double integrate_active(const std::vector<Interval>& active,
                        const std::function<double(double)>& f) {
    double s = 0.0;
    for (const auto& iv : active)
        if (iv.hi > iv.lo) s += integrate(f, iv.lo, iv.hi, 1e-11);
    return s;
}

}  // namespace

DontCareSpec detect(const SensitivityProfile& profile, const Marginal& f) {
    const GridFunction& g = profile.gamma;
    DontCareSpec spec;
    spec.j = profile.j;

    std::size_t i = 0;
    while (i < g.size()) {
        if (g.v[i] > 0.0) {
            ++i;
            continue;
        }
        std::size_t run_start = i;
        while (i < g.size() && g.v[i] == 0.0) ++i;
        std::size_t run_end = i - 1;
        if (run_end - run_start + 1 < std::size_t(kMinRunNodes)) continue;
        // Conservative edges: the outermost zero nodes. A true zero region
        // reaching into the neighbouring cell only wastes a sliver of fine
        // rate; overshooting would leak live probability into the interval
        // codeword.
        Interval z;
        z.lo = run_start == 0 ? 0.0 : g.node(run_start);
        z.hi = run_end == g.size() - 1 ? 1.0 : g.node(run_end);
        double p = f.cdf(z.hi) - f.cdf(z.lo);
        if (p < kMinIntervalProb) continue;
        spec.intervals.push_back(z);
        spec.interval_prob.push_back(p);
    }

    double pz = 0.0;
    for (double p : spec.interval_prob) pz += p;
    spec.p_active = 1.0 - pz;
    if (!spec.intervals.empty() && spec.p_active <= kMinIntervalProb)
        throw DomainError("don't-care intervals cover the whole support");
    spec.rho = spec.p_active > 0.0 ? 1.0 / spec.p_active : 1.0;
    double hi_bits = 0.0;
    if (spec.p_active > 0.0 && !spec.intervals.empty())
        hi_bits -= spec.p_active * std::log2(spec.p_active);
    for (double p : spec.interval_prob)
        if (p > 0.0) hi_bits -= p * std::log2(p);
    spec.indicator_bits = hi_bits;
    return spec;
}

int DontCareQuantizer::quantize(double x) const {
    for (std::size_t i = 0; i < spec.intervals.size(); ++i)
        if (x >= spec.intervals[i].lo && x <= spec.intervals[i].hi)
            return int(i);
    auto it = std::lower_bound(fine_edges.begin(), fine_edges.end(), x);
    int idx = int(it - fine_edges.begin()) - 1;
    idx = std::clamp(idx, 0, fine_cells() - 1);
    if (x <= fine_edges.front()) idx = 0;
    return int(spec.intervals.size()) + idx;
}

double DontCareQuantizer::reconstruct(int cell) const {
    int m = int(spec.intervals.size());
    if (cell < m) return interval_codes[std::size_t(cell)];
    return fine_codes.at(std::size_t(cell - m));
}

DontCareQuantizer build_dontcare_quantizer(const DontCareSpec& spec,
                                           const PointDensity& lambda_active,
                                           const Marginal& f, int K) {
    int m = int(spec.intervals.size());
    if (K <= m)
        throw ResolutionError("don't-care quantizer needs K > interval count");
    DontCareQuantizer q;
    q.spec = spec;
    q.active = complement_of(spec.intervals);
    int n_fine = K - m;

    // Mask the density to the active region and use its cumulative for the
    // fine cells. Boundaries landing on a plateau (inside Z) snap to the
    // nearest active edge.
    const std::size_t nodes = (std::size_t(1) << 12) + 1;
    GridFunction masked = GridFunction::tabulate(
        [&](double x) {
            for (const auto& z : spec.intervals)
                if (x >= z.lo && x <= z.hi) return 0.0;
            return std::max(0.0, lambda_active(x));
        },
        nodes);
    Compander c = Compander::build(PointDensity::from_grid(std::move(masked)));

    auto snap = [&](double x) {
        for (const auto& z : spec.intervals) {
            if (x > z.lo && x < z.hi)
                return (x - z.lo < z.hi - x) ? z.lo : z.hi;
        }
        return x;
    };
    q.fine_edges.resize(std::size_t(n_fine) + 1);
    q.fine_edges.front() = 0.0;
    q.fine_edges.back() = 1.0;
    for (int i = 1; i < n_fine; ++i)
        q.fine_edges[std::size_t(i)] =
            snap(c.inverse(double(i) / double(n_fine)));
    q.fine_codes.resize(std::size_t(n_fine));
    for (int i = 0; i < n_fine; ++i)
        q.fine_codes[std::size_t(i)] =
            snap(c.inverse((2.0 * i + 1.0) / (2.0 * n_fine)));

    for (const auto& z : spec.intervals) {
        double p = f.cdf(z.hi) - f.cdf(z.lo);
        double mean =
            p > 0.0
                ? integrate([&f](double x) { return x * f.pdf(x); }, z.lo,
                            z.hi, 1e-12) /
                      p
                : 0.5 * (z.lo + z.hi);
        q.interval_codes.push_back(mean);
    }
    return q;
}

double vr_distortion_amplified(const std::vector<DontCareSpec>& specs,
                               const std::vector<SensitivityProfile>& profiles,
                               const SourceModel& src,
                               std::span<const double> alpha, double R) {
    if (specs.size() != profiles.size() || specs.size() != alpha.size())
        throw DomainError("specs, profiles and allocation must align");
    double d = 0.0;
    for (std::size_t j = 0; j < specs.size(); ++j) {
        const auto& spec = specs[j];
        const Marginal& f = src.marginal(int(j));
        const GridFunction& gamma = profiles[j].gamma;
        auto active = complement_of(spec.intervals);
        double pa = spec.p_active;
        double rj = alpha[j] * R;
        if (rj < spec.indicator_bits)
            throw DomainError(
                "rate below the indicator cost; amplified formula invalid");
        // Conditional entropy and log-sensitivity over the active region.
        double h_cond = -integrate_active(active, [&](double x) {
            double fx = f.pdf(x) / pa;
            return fx <= 0.0 ? 0.0 : fx * std::log2(fx);
        });
        double elog_cond = integrate_active(active, [&](double x) {
            return f.pdf(x) / pa * log2_clamped(gamma(x));
        });
        double expo =
            spec.rho * (rj - spec.indicator_bits) + h_cond + elog_cond;
        d += (1.0 / spec.rho) / 12.0 * std::exp2(-2.0 * expo);
    }
    return d;
}

DontCareSweep simulate_dontcare(const DontCareSpec& spec,
                                const SourceModel& src, const FunctionModel& g,
                                const std::vector<double>& rates,
                                std::size_t samples, std::uint64_t seed,
                                Regime regime) {
    if (g.n != 1 || src.n() != 1)
        throw ConfigError("the don't-care simulator is univariate");
    const Marginal& f = src.marginal(0);
    auto profile = sensitivity_profile(g, src, 0);
    // Density over the active region per regime.
    GridFunction lam = profile.gamma;
    if (regime == Regime::Fixed)
        for (std::size_t i = 0; i < lam.size(); ++i)
            lam.v[i] = std::cbrt(lam.v[i] * lam.v[i] * f.pdf(lam.node(i)));
    PointDensity lambda = PointDensity::from_grid(std::move(lam));

    DontCareSweep sweep;
    sweep.regime = regime;
    sweep.nominal_slope = regime == Regime::Fixed ? -2.0 : -2.0 * spec.rho;

    for (double R : rates) {
        int m = int(spec.intervals.size());
        int n_fine;
        if (regime == Regime::Fixed) {
            n_fine = int(std::floor(std::exp2(R) + 1e-9)) - m;
        } else {
            double fine_bits = spec.rho * (R - spec.indicator_bits);
            n_fine = int(std::floor(std::exp2(fine_bits) * (1.0 + 1e-12)));
        }
        if (n_fine < 1)
            throw ResolutionError("rate too small for the don't-care scheme");
        auto q = build_dontcare_quantizer(spec, lambda, f, n_fine + m);

        // Conditional-mean estimates per cell.
        std::vector<double> ghat(std::size_t(m) + std::size_t(n_fine));
        for (int i = 0; i < m; ++i) {
            const auto& z = spec.intervals[std::size_t(i)];
            double p = f.cdf(z.hi) - f.cdf(z.lo);
            ghat[std::size_t(i)] =
                integrate(
                    [&](double x) {
                        return g.eval(std::span<const double>(&x, 1)) *
                               f.pdf(x);
                    },
                    z.lo, z.hi, 1e-12) /
                p;
        }
        for (int i = 0; i < n_fine; ++i) {
            double a = q.fine_edges[std::size_t(i)];
            double b = q.fine_edges[std::size_t(i) + 1];
            double p = f.cdf(b) - f.cdf(a);
            if (p > 1e-15) {
                ghat[std::size_t(m + i)] =
                    gauss_legendre8(
                        [&](double x) {
                            return g.eval(std::span<const double>(&x, 1)) *
                                   f.pdf(x);
                        },
                        a, b) /
                    p;
            } else {
                double mid = q.fine_codes[std::size_t(i)];
                ghat[std::size_t(m + i)] =
                    g.eval(std::span<const double>(&mid, 1));
            }
        }

        std::size_t batch = SourceModel::kBatch;
        int n_batches = int((samples + batch - 1) / batch);
        std::vector<double> bm(std::size_t(n_batches), 0.0);
        parallel_batches(n_batches, [&](int b) {
            BatchRng rng(seed, std::uint64_t(b));
            std::size_t begin = std::size_t(b) * batch;
            std::size_t end = std::min(samples, begin + batch);
            double sum = 0.0;
            for (std::size_t s = begin; s < end; ++s) {
                double x = f.inv_cdf(rng.uniform());
                int cell = q.quantize(x);
                double err = g.eval(std::span<const double>(&x, 1)) -
                             ghat[std::size_t(cell)];
                sum += err * err;
            }
            bm[std::size_t(b)] = sum / double(end - begin);
        });
        double mean = 0.0;
        for (double v : bm) mean += v;
        mean /= double(n_batches);
        double var = 0.0;
        for (double v : bm) var += (v - mean) * (v - mean);
        double se = n_batches > 1 ? std::sqrt(var / n_batches / (n_batches - 1))
                                  : 0.0;
        sweep.rows.push_back({R, mean, se});
    }

    // Fit log2 D = a + slope * R; report the constant at the nominal slope.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    double clog = 0.0;
    std::size_t nr = sweep.rows.size();
    for (const auto& row : sweep.rows) {
        double y = std::log2(std::max(row.D_emp, 1e-300));
        sx += row.R;
        sy += y;
        sxx += row.R * row.R;
        sxy += row.R * y;
        clog += y - sweep.nominal_slope * row.R;
    }
    if (nr >= 2) {
        double denom = double(nr) * sxx - sx * sx;
        sweep.slope = (double(nr) * sxy - sx * sy) / denom;
    }
    sweep.constant = std::exp2(clog / double(nr));
    return sweep;
}

}  // namespace dfsq
