#include "dfsq/distortion.hpp"

#include <algorithm>
#include <cmath>

#include "dfsq/parallel.hpp"
#include "dfsq/quadrature.hpp"
#include "dfsq/rng.hpp"

namespace dfsq {

double hr_distortion_resolution(const std::vector<SensitivityProfile>& profiles,
                                const std::vector<PointDensity>& lambdas,
                                std::span<const double> alpha, double K,
                                const SourceModel& src) {
    if (profiles.size() != lambdas.size() || profiles.size() != alpha.size())
        throw DomainError("profiles, densities and allocation must align");
    double d = 0.0;
    for (std::size_t j = 0; j < profiles.size(); ++j) {
        const GridFunction& g = profiles[j].gamma;
        GridFunction integrand = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double x = g.node(i);
            double lam = lambdas[j](x);
            double gam = g.v[i];
            double f = src.marginal(int(j)).pdf(x);
            if (lam < kGammaClamp) {
                if (gam > kGammaClamp)
                    throw NumericError(
                        "E[(gamma/lambda)^2] diverges for variable " +
                        std::to_string(j));
                integrand.v[i] = 0.0;
            } else {
                integrand.v[i] = f * (gam / lam) * (gam / lam);
            }
        }
        double second_moment = integrand.integral();
        d += second_moment / 12.0 * std::pow(K, -2.0 * alpha[j]);
    }
    return d;
}

double hr_distortion_rate(const DesignResult& design, double R) {
    return design.hr_distortion(R);
}

// ---------------------------------------------------------------------------
// EstimatorTable

namespace {

std::vector<std::size_t> cell_strides(const DistributedQuantizer& dq) {
    std::vector<std::size_t> strides(std::size_t(dq.n()), 1);
    for (int j = dq.n() - 2; j >= 0; --j)
        strides[std::size_t(j)] = strides[std::size_t(j) + 1] *
                                  std::size_t(dq.quantizer(j + 1).K());
    return strides;
}

std::size_t flatten(std::span<const int> cells,
                    const std::vector<std::size_t>& strides) {
    std::size_t f = 0;
    for (std::size_t j = 0; j < strides.size(); ++j)
        f += std::size_t(cells[j]) * strides[j];
    return f;
}

}  // namespace

double EstimatorTable::estimate(std::span<const int> cells,
                                std::span<const double> recon) const {
    if (mode_ == EstimatorMode::CellCenter) return g_->eval(recon);
    std::size_t key = flatten(cells, strides_);
    if (mode_ == EstimatorMode::Numeric) return dense_[key];
    auto it = sparse_.find(key);
    return it != sparse_.end() ? it->second : g_->eval(recon);
}

EstimatorTable estimator_table(const DistributedQuantizer& dq,
                               const SourceModel& src, const FunctionModel& g,
                               EstimatorMode mode, std::size_t mc_samples,
                               std::uint64_t seed) {
    EstimatorTable t;
    t.mode_ = mode;
    t.g_ = &g;
    t.strides_ = cell_strides(dq);
    if (mode == EstimatorMode::CellCenter) return t;

    if (mode == EstimatorMode::Numeric) {
        if (dq.n() > 3)
            throw ConfigError("numeric estimator tables support n <= 3");
        double cell_count = 1.0;
        for (int j = 0; j < dq.n(); ++j)
            cell_count *= double(dq.quantizer(j).K());
        if (cell_count > double(1 << 24))
            throw ResolutionError("estimator cell count exceeds 2^24");

        int n = dq.n();
        int nodes = n <= 2 ? 8 : 4;
        static constexpr double kGL4Nodes[4] = {
            -0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
            0.8611363115940526};
        static constexpr double kGL4Weights[4] = {
            0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
            0.3478548451374538};
        t.dense_.assign(std::size_t(cell_count), 0.0);
        std::vector<int> idx(std::size_t(n), 0);
        std::vector<double> x(std::size_t(n), 0.0), lo(std::size_t(n), 0.0),
            hi(std::size_t(n), 0.0);
        std::vector<std::vector<double>> gl_x, gl_w;
        gl_x.resize(std::size_t(n));
        gl_w.resize(std::size_t(n));
        while (true) {
            for (int j = 0; j < n; ++j) {
                const auto& b = dq.quantizer(j).boundaries();
                lo[std::size_t(j)] = b[std::size_t(idx[std::size_t(j)])];
                hi[std::size_t(j)] = b[std::size_t(idx[std::size_t(j)]) + 1];
                auto& xs = gl_x[std::size_t(j)];
                auto& ws = gl_w[std::size_t(j)];
                xs.assign(std::size_t(nodes), 0.0);
                ws.assign(std::size_t(nodes), 0.0);
                double c = 0.5 * (lo[std::size_t(j)] + hi[std::size_t(j)]);
                double h = 0.5 * (hi[std::size_t(j)] - lo[std::size_t(j)]);
                for (int q = 0; q < nodes; ++q) {
                    double node = nodes == 8 ? kGL8Nodes[q] : kGL4Nodes[q];
                    double wq = nodes == 8 ? kGL8Weights[q] : kGL4Weights[q];
                    xs[std::size_t(q)] = c + h * node;
                    ws[std::size_t(q)] = h * wq;
                }
            }
            // Tensor quadrature of g*f and f over the cell.
            double num = 0.0, den = 0.0;
            std::vector<int> qi(std::size_t(n), 0);
            while (true) {
                double wgt = 1.0;
                for (int j = 0; j < n; ++j) {
                    x[std::size_t(j)] =
                        gl_x[std::size_t(j)][std::size_t(qi[std::size_t(j)])];
                    wgt *= gl_w[std::size_t(j)][std::size_t(qi[std::size_t(j)])];
                }
                double f = src.joint_pdf(x);
                num += wgt * f * g.eval(x);
                den += wgt * f;
                int j = n - 1;
                while (j >= 0 && ++qi[std::size_t(j)] >= nodes)
                    qi[std::size_t(j)] = 0, --j;
                if (j < 0) break;
            }
            std::size_t key = flatten(idx, t.strides_);
            if (den > 1e-14) {
                t.dense_[key] = num / den;
            } else {
                // Vanishing-probability cell: estimate at the reconstruction
                // point.
                for (int j = 0; j < n; ++j)
                    x[std::size_t(j)] =
                        dq.quantizer(j).reconstruct(idx[std::size_t(j)]);
                t.dense_[key] = g.eval(x);
                ++t.flagged_;
            }
            int j = n - 1;
            while (j >= 0 && ++idx[std::size_t(j)] >= dq.quantizer(j).K())
                idx[std::size_t(j)] = 0, --j;
            if (j < 0) break;
        }
        return t;
    }

    // Monte Carlo mode: accumulate per-cell means; cells with fewer than 8
    // hits stay out of the map and fall back to g at the reconstruction.
    struct Acc {
        std::int64_t count = 0;
        double sum = 0.0;
    };
    std::unordered_map<std::size_t, Acc> acc;
    auto xs = src.sample(mc_samples, seed);
    std::vector<int> cells(std::size_t(dq.n()), 0);
    for (std::size_t s = 0; s < mc_samples; ++s) {
        std::span<const double> x(&xs[s * std::size_t(dq.n())],
                                  std::size_t(dq.n()));
        dq.quantize(x, cells);
        auto& a = acc[flatten(cells, t.strides_)];
        a.count += 1;
        a.sum += g.eval(x);
    }
    for (const auto& [key, a] : acc) {
        if (a.count >= 8)
            t.sparse_.emplace(key, a.sum / double(a.count));
        else
            ++t.flagged_;
    }
    return t;
}

// ---------------------------------------------------------------------------
// empirical_distortion

DistortionReport empirical_distortion(const DistributedQuantizer& dq,
                                      const SourceModel& src,
                                      const FunctionModel& g,
                                      const EstimatorTable& est,
                                      std::size_t samples, std::uint64_t seed,
                                      int threads, double d_hr) {
    int n = dq.n();
    std::size_t batch = SourceModel::kBatch;
    int n_batches = int((samples + batch - 1) / batch);
    std::vector<double> batch_mean(std::size_t(n_batches), 0.0);
    std::vector<std::size_t> batch_count(std::size_t(n_batches), 0);

    parallel_batches(
        n_batches,
        [&](int b) {
            BatchRng rng(seed, std::uint64_t(b));
            std::size_t begin = std::size_t(b) * batch;
            std::size_t end = std::min(samples, begin + batch);
            std::vector<double> x(std::size_t(n), 0.0), u(std::size_t(n), 0.0),
                recon(std::size_t(n), 0.0);
            std::vector<int> cells(std::size_t(n), 0);
            double sum = 0.0;
            const GridJoint* gj = src.grid_joint();
            for (std::size_t s = begin; s < end; ++s) {
                for (int d = 0; d < n; ++d) u[std::size_t(d)] = rng.uniform();
                if (gj) {
                    gj->sample(u, x);
                } else {
                    for (int d = 0; d < n; ++d)
                        x[std::size_t(d)] =
                            src.marginal(d).inv_cdf(u[std::size_t(d)]);
                }
                dq.quantize(x, cells);
                dq.reconstruct(cells, recon);
                double ghat = est.estimate(cells, recon);
                double err = g.eval(x) - ghat;
                sum += err * err;
            }
            batch_mean[std::size_t(b)] = sum / double(end - begin);
            batch_count[std::size_t(b)] = end - begin;
        },
        threads);

    // Deterministic reduction in batch order.
    double total = 0.0, count = 0.0;
    for (int b = 0; b < n_batches; ++b) {
        total += batch_mean[std::size_t(b)] * double(batch_count[std::size_t(b)]);
        count += double(batch_count[std::size_t(b)]);
    }
    double mean = total / count;
    double var_bm = 0.0;
    for (int b = 0; b < n_batches; ++b) {
        double d = batch_mean[std::size_t(b)] - mean;
        var_bm += d * d;
    }
    double se = n_batches > 1
                    ? std::sqrt(var_bm / double(n_batches) /
                                double(n_batches - 1))
                    : 0.0;

    DistortionReport rep;
    rep.log2_K = std::log2(dq.total_resolution());
    rep.D_hr = d_hr;
    rep.D_emp = mean;
    rep.stderr_emp = se;
    rep.ratio = d_hr > 0.0 ? mean / d_hr : 0.0;
    return rep;
}

std::pair<double, double> cell_variance_bounds(const FunctionModel& g,
                                               std::span<const double> lo,
                                               std::span<const double> hi,
                                               const SourceModel& src) {
    if (!g.partial_bounds)
        throw DomainError("function does not expose partial ranges");
    int n = g.n;
    double sum_lo = 0.0, sum_hi = 0.0;
    for (int j = 0; j < n; ++j) {
        auto b = g.partial_bounds(j, lo, hi);
        if (!b.valid)
            throw DomainError("partial range unavailable over this cell");
        double d = hi[std::size_t(j)] - lo[std::size_t(j)];
        sum_lo += b.lo * b.lo * d * d / 12.0;
        sum_hi += b.hi * b.hi * d * d / 12.0;
    }
    // Conditional-density envelope: f(x | cell) lies between the extreme
    // density values times volume over probability.
    double vol = 1.0;
    for (int j = 0; j < n; ++j) vol *= hi[std::size_t(j)] - lo[std::size_t(j)];
    double p = src.box_prob(lo, hi);
    if (!(p > 0.0)) throw DomainError("cell has zero probability");
    double fmin = 1.0, fmax = 1.0;
    if (src.independent()) {
        for (int j = 0; j < n; ++j) {
            auto [mn, mx] = src.marginal(j).pdf_range(lo[std::size_t(j)],
                                                      hi[std::size_t(j)]);
            fmin *= mn;
            fmax *= mx;
        }
    } else {
        const int scan = 8;
        std::vector<double> x(std::size_t(n), 0.0);
        fmin = 1e300;
        fmax = 0.0;
        std::vector<int> idx(std::size_t(n), 0);
        while (true) {
            for (int j = 0; j < n; ++j)
                x[std::size_t(j)] =
                    lo[std::size_t(j)] +
                    (hi[std::size_t(j)] - lo[std::size_t(j)]) *
                        (double(idx[std::size_t(j)]) + 0.5) / double(scan);
            double f = src.joint_pdf(x);
            fmin = std::min(fmin, f);
            fmax = std::max(fmax, f);
            int j = n - 1;
            while (j >= 0 && ++idx[std::size_t(j)] >= scan)
                idx[std::size_t(j)] = 0, --j;
            if (j < 0) break;
        }
    }
    return {sum_lo * fmin * vol / p, sum_hi * fmax * vol / p};
}

}  // namespace dfsq
