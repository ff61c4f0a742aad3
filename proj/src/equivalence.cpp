#include "dfsq/equivalence.hpp"

#include <algorithm>
#include <cmath>

#include "dfsq/parallel.hpp"
#include "dfsq/quadrature.hpp"
#include "dfsq/rng.hpp"

namespace dfsq {

EquivalenceStat equivalence_statistic(const FunctionModel& g,
                                      const SourceModel& src, int j, double s,
                                      double t, std::size_t mc_samples,
                                      std::uint64_t seed) {
    if (s == t) throw DomainError("equivalence statistic needs s != t");
    if (j < 0 || j >= g.n) throw DomainError("variable index out of range");

    std::size_t width = std::size_t(g.n - 1);
    std::vector<double> others;
    if (g.n > 1) others = src.sample_others_given(j, s, mc_samples, seed);
    std::size_t count = g.n > 1 ? mc_samples : 1;

    std::vector<double> ps(std::size_t(g.n), 0.0), pt(std::size_t(g.n), 0.0);
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t k = 0;
        for (int d = 0; d < g.n; ++d) {
            double v = d == j ? 0.0 : others[i * width + k++];
            ps[std::size_t(d)] = d == j ? s : v;
            pt[std::size_t(d)] = d == j ? t : v;
        }
        double fs = src.joint_pdf(ps), ft = src.joint_pdf(pt);
        double tot = fs + ft;
        if (tot <= 0.0) continue;
        double ws = fs / tot;
        double gs = g.eval(ps), gt = g.eval(pt);
        double v = ws * (1.0 - ws) * (gs - gt) * (gs - gt);
        sum += v;
        sumsq += v * v;
    }
    EquivalenceStat stat;
    stat.v = sum / double(count);
    if (count > 1) {
        double var = std::max(0.0, sumsq / double(count) - stat.v * stat.v);
        stat.se = std::sqrt(var / double(count));
    }
    return stat;
}

GeneralizedCompander build_binning_compander(const FunctionModel& g,
                                             const SourceModel& src, int j,
                                             const MirrorPairing& pairing,
                                             std::size_t mc_samples,
                                             std::uint64_t seed) {
    if (!(pairing.lo < pairing.center && pairing.center < pairing.hi))
        throw DomainError("pairing needs lo < center < hi");
    // The pairing must actually be an equivalence before we bin it.
    for (int i = 0; i < 16; ++i) {
        double s = pairing.lo +
                   (pairing.center - pairing.lo) * (double(i) + 0.5) / 16.0;
        double t = pairing.map(s);
        if (t > 1.0 || t < 0.0) continue;
        auto stat = equivalence_statistic(g, src, j, s, t, mc_samples,
                                          seed + std::uint64_t(i));
        if (stat.v > std::max(1e-8, 3.0 * stat.se))
            throw DomainError("pairing failed the equivalence test at s = " +
                              std::to_string(s));
    }

    // Slope magnitude follows the sensitivity profile; the sign folds at the
    // pairing center. Mirror symmetry of gamma around the center makes the
    // paired values meet automatically.
    auto closed = g.closed_gamma ? g.closed_gamma(j, src) : std::nullopt;
    SensitivityProfile prof;
    if (!closed) prof = sensitivity_profile(g, src, j, 1025, mc_samples, seed);
    auto gamma = [&](double x) {
        return closed ? (*closed)(x) : prof.gamma(x);
    };

    constexpr std::size_t kCells = 4096;
    auto w_nodes = std::make_shared<std::vector<double>>(kCells + 1, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < kCells; ++i) {
        double a = double(i) / kCells, b = double(i + 1) / kCells;
        double seg = integrate(gamma, a, b, 1e-12);
        acc += (a >= pairing.center ? -seg : seg);
        (*w_nodes)[i + 1] = acc;
    }
    double wmin = *std::min_element(w_nodes->begin(), w_nodes->end());
    double wmax = *std::max_element(w_nodes->begin(), w_nodes->end());
    if (!(wmax > wmin))
        throw NumericError("degenerate binning compander (zero sensitivity?)");
    for (auto& v : *w_nodes) v = (v - wmin) / (wmax - wmin);

    auto w = [w_nodes](double x) {
        if (x <= 0.0) return (*w_nodes).front();
        if (x >= 1.0) return (*w_nodes).back();
        double t = x * double(kCells);
        auto i = std::min<std::size_t>(kCells - 1, std::size_t(t));
        double f = t - double(i);
        return (*w_nodes)[i] + f * ((*w_nodes)[i + 1] - (*w_nodes)[i]);
    };
    return GeneralizedCompander(w, {0.0, pairing.center, 1.0});
}

namespace {

// Dense conditional-mean table over (union cell) x (interval cell), n = 2.
std::vector<double> binned_estimator(const FunctionModel& g,
                                     const SourceModel& src,
                                     const NonRegularQuantizer& q1,
                                     const CompandingQuantizer& q2) {
    int k1 = q1.K(), k2 = q2.K();
    std::vector<double> table(std::size_t(k1) * std::size_t(k2), 0.0);
    for (int i = 0; i < k1; ++i) {
        for (int c = 0; c < k2; ++c) {
            double a2 = q2.boundaries()[std::size_t(c)];
            double b2 = q2.boundaries()[std::size_t(c) + 1];
            double num = 0.0, den = 0.0;
            for (const auto& piece : q1.cell(i)) {
                if (!(piece.hi > piece.lo)) continue;
                num += gauss_legendre8(
                    [&](double x1) {
                        return gauss_legendre8(
                            [&](double x2) {
                                double pt[2] = {x1, x2};
                                std::span<const double> sp(pt, 2);
                                return g.eval(sp) * src.joint_pdf(sp);
                            },
                            a2, b2);
                    },
                    piece.lo, piece.hi);
                den += gauss_legendre8(
                    [&](double x1) {
                        return gauss_legendre8(
                            [&](double x2) {
                                double pt[2] = {x1, x2};
                                return src.joint_pdf(
                                    std::span<const double>(pt, 2));
                            },
                            a2, b2);
                    },
                    piece.lo, piece.hi);
            }
            double ghat;
            if (den > 1e-14) {
                ghat = num / den;
            } else {
                double mid1 = q1.cell(i).empty()
                                  ? 0.5
                                  : 0.5 * (q1.cell(i).front().lo +
                                           q1.cell(i).front().hi);
                double pt[2] = {mid1, 0.5 * (a2 + b2)};
                ghat = g.eval(std::span<const double>(pt, 2));
            }
            table[std::size_t(i) * std::size_t(k2) + std::size_t(c)] = ghat;
        }
    }
    return table;
}

}  // namespace

FloorSweep distortion_floor_demo(const FunctionModel& g, const SourceModel& src,
                                 const GeneralizedCompander& binning,
                                 const std::vector<double>& rates,
                                 std::size_t samples, std::uint64_t seed,
                                 int threads) {
    if (g.n != 2 || src.n() != 2)
        throw ConfigError("the floor demo is bivariate");

    // Regular baseline: fixed-rate design for both variables.
    DesignProblem dp;
    dp.source = &src;
    dp.function = &g;
    dp.regime = Regime::Fixed;
    auto des = design(dp);

    FloorSweep sweep;
    for (double rbar : rates) {
        int K = int(std::floor(std::exp2(rbar) + 1e-9));
        auto q1 = bin_map(binning, K);
        auto q2 = CompandingQuantizer::build(Compander::build(des.lambdas[1]),
                                             K, 1e-10);
        auto table = binned_estimator(g, src, q1, q2);

        std::size_t batch = SourceModel::kBatch;
        int n_batches = int((samples + batch - 1) / batch);
        std::vector<double> bm(std::size_t(n_batches), 0.0);
        parallel_batches(
            n_batches,
            [&](int b) {
                BatchRng rng(seed, std::uint64_t(b));
                std::size_t begin = std::size_t(b) * batch;
                std::size_t end = std::min(samples, begin + batch);
                double sum = 0.0;
                for (std::size_t s = begin; s < end; ++s) {
                    double x1 = src.marginal(0).inv_cdf(rng.uniform());
                    double x2 = src.marginal(1).inv_cdf(rng.uniform());
                    int c1 = q1.quantize(x1);
                    int c2 = q2.quantize(x2);
                    double pt[2] = {x1, x2};
                    double err =
                        g.eval(std::span<const double>(pt, 2)) -
                        table[std::size_t(c1) * std::size_t(q2.K()) +
                              std::size_t(c2)];
                    sum += err * err;
                }
                bm[std::size_t(b)] = sum / double(end - begin);
            },
            threads);
        double d_binned = 0.0;
        for (double v : bm) d_binned += v;
        d_binned /= double(n_batches);

        // Regular design at the same per-variable rate.
        double alpha2[2] = {0.5, 0.5};
        auto dq = build_distributed(des.lambdas,
                                    std::span<const double>(alpha2, 2),
                                    std::exp2(2.0 * rbar));
        auto est = estimator_table(dq, src, g, EstimatorMode::Numeric);
        auto rep = empirical_distortion(dq, src, g, est, samples, seed,
                                        threads, 0.0);
        sweep.rows.push_back({rbar, d_binned, rep.D_emp});
    }

    if (sweep.rows.size() >= 2) {
        const auto& last = sweep.rows[sweep.rows.size() - 1];
        const auto& prev = sweep.rows[sweep.rows.size() - 2];
        sweep.binned_last_ratio = prev.D_binned / last.D_binned;
        sweep.binned_plateaus = std::fabs(sweep.binned_last_ratio - 1.0) < 0.1;
        sweep.regular_drop = 1e300;
        for (std::size_t i = 0; i + 1 < sweep.rows.size(); ++i)
            sweep.regular_drop =
                std::min(sweep.regular_drop, sweep.rows[i].D_regular /
                                                 sweep.rows[i + 1].D_regular);
    }
    return sweep;
}

std::vector<std::vector<EquivalenceStat>> equivalence_scan(
    const FunctionModel& g, const SourceModel& src, int j, int grid,
    std::size_t mc_samples, std::uint64_t seed) {
    std::vector<std::vector<EquivalenceStat>> out;
    out.resize(std::size_t(grid));
    for (auto& row : out) row.resize(std::size_t(grid));
    for (int a = 0; a < grid; ++a) {
        for (int b = 0; b < grid; ++b) {
            double s = (double(a) + 0.5) / grid;
            double t = (double(b) + 0.5) / grid;
            if (a == b) continue;
            out[std::size_t(a)][std::size_t(b)] =
                equivalence_statistic(g, src, j, s, t, mc_samples, seed);
        }
    }
    return out;
}

}  // namespace dfsq
