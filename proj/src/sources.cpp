#include "dfsq/sources.hpp"

#include <algorithm>
#include <cmath>

#include "dfsq/parallel.hpp"
#include "dfsq/quadrature.hpp"
#include "dfsq/rng.hpp"

namespace dfsq {

// ---------------------------------------------------------------------------
// Marginal

Marginal::Marginal(std::string kind, std::function<double(double)> pdf,
                   std::function<double(double)> cdf)
    : kind_(std::move(kind)), pdf_(std::move(pdf)), cdf_(std::move(cdf)) {
    if (!cdf_) {
        // Cache the cdf on a fine grid; design formulas evaluate it often.
        auto p = pdf_;
        const std::size_t cells = std::size_t(1) << 14;
        auto tab = std::make_shared<GridFunction>();
        tab->lo = 0.0;
        tab->hi = 1.0;
        tab->v.resize(cells + 1);
        double acc = 0.0;
        (*tab).v[0] = 0.0;
        double h = 1.0 / double(cells);
        for (std::size_t i = 0; i < cells; ++i) {
            acc += integrate(p, double(i) * h, double(i + 1) * h, 1e-13);
            tab->v[i + 1] = acc;
        }
        if (std::fabs(acc - 1.0) > 1e-8)
            throw NumericError("marginal pdf does not integrate to 1: " +
                               std::to_string(acc));
        for (auto& v : tab->v) v /= acc;
        cdf_tab_ = tab;
        cdf_ = [tab](double x) { return (*tab)(x); };
    }
}

double Marginal::cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return cdf_(x);
}

double Marginal::inv_cdf(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    if (inv_) return inv_(u);
    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-13) {
        double mid = 0.5 * (lo + hi);
        (cdf(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double Marginal::entropy_bits() const {
    if (!entropy_cache_) {
        auto p = pdf_;
        entropy_cache_ = -integrate(
            [&p](double x) {
                double f = p(x);
                return f <= 0.0 ? 0.0 : f * std::log2(f);
            },
            0.0, 1.0, 1e-12);
    }
    return *entropy_cache_;
}

std::pair<double, double> Marginal::pdf_range(double lo, double hi) const {
    if (monotone_pdf_) {
        double a = pdf_(lo), b = pdf_(hi);
        return {std::min(a, b), std::max(a, b)};
    }
    double mn = pdf_(lo), mx = mn;
    const int scan = 64;
    for (int i = 1; i <= scan; ++i) {
        double f = pdf_(lo + (hi - lo) * double(i) / scan);
        mn = std::min(mn, f);
        mx = std::max(mx, f);
    }
    return {mn, mx};
}

Marginal Marginal::uniform() {
    Marginal m("uniform", [](double) { return 1.0; },
               [](double x) { return x; });
    m.inv_ = [](double u) { return u; };
    m.monotone_pdf_ = true;
    m.entropy_cache_ = 0.0;
    return m;
}

Marginal Marginal::power(int k) {
    if (k < 0) throw ConfigError("power marginal needs k >= 0");
    if (k == 0) return uniform();
    double a = double(k + 1);
    Marginal m("power(" + std::to_string(k) + ")",
               [a, k](double x) { return a * std::pow(x, k); },
               [a](double x) { return std::pow(x, a); });
    m.inv_ = [a](double u) { return std::pow(u, 1.0 / a); };
    m.monotone_pdf_ = true;
    return m;
}

Marginal Marginal::grid(std::vector<double> weights) {
    if (weights.empty()) throw ConfigError("grid marginal needs weights");
    double mean = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ConfigError("grid marginal weights must be >= 0");
        mean += w;
    }
    mean /= double(weights.size());
    if (mean <= 0.0) throw ConfigError("grid marginal has zero mass");
    for (auto& w : weights) w /= mean;

    auto vals = std::make_shared<std::vector<double>>(std::move(weights));
    std::size_t cells = vals->size();
    auto cum = std::make_shared<std::vector<double>>(cells + 1, 0.0);
    for (std::size_t i = 0; i < cells; ++i)
        (*cum)[i + 1] = (*cum)[i] + (*vals)[i] / double(cells);

    Marginal m(
        "grid",
        [vals, cells](double x) {
            auto i = std::min(cells - 1,
                              std::size_t(std::max(0.0, x) * double(cells)));
            return (*vals)[i];
        },
        [vals, cum, cells](double x) {
            if (x <= 0.0) return 0.0;
            if (x >= 1.0) return 1.0;
            auto i = std::min(cells - 1, std::size_t(x * double(cells)));
            return (*cum)[i] + (*vals)[i] * (x - double(i) / double(cells));
        });
    return m;
}

// ---------------------------------------------------------------------------
// GridJoint

GridJoint::GridJoint(int n, int m, std::vector<double> weights)
    : n_(n), m_(m), w_(std::move(weights)) {
    if (n_ < 2 || n_ > 3) throw ConfigError("grid joints support n = 2 or 3");
    std::size_t expect = 1;
    for (int d = 0; d < n_; ++d) expect *= std::size_t(m_);
    if (w_.size() != expect)
        throw ConfigError("grid joint needs m^n weights");
    double vol = std::pow(double(m_), -n_);
    double total = 0.0;
    for (double w : w_) {
        if (w < 0.0) throw ConfigError("grid joint weights must be >= 0");
        total += w * vol;
    }
    if (total <= 0.0) throw ConfigError("grid joint has zero mass");
    for (auto& w : w_) w /= total;
}

double GridJoint::pdf(std::span<const double> x) const {
    std::size_t idx = 0;
    for (int d = 0; d < n_; ++d) {
        auto i = std::min<std::size_t>(m_ - 1, std::size_t(std::max(0.0, x[d]) * m_));
        idx = idx * std::size_t(m_) + i;
    }
    return w_[idx];
}

double GridJoint::box_prob(std::span<const double> lo,
                           std::span<const double> hi) const {
    // Exact integral of the step density over an axis-aligned box: sum cell
    // weights times the overlap volume.
    std::vector<int> i0(n_), i1(n_);
    for (int d = 0; d < n_; ++d) {
        if (hi[d] <= lo[d]) return 0.0;
        i0[d] = std::clamp(int(lo[d] * m_), 0, m_ - 1);
        i1[d] = std::clamp(int(std::ceil(hi[d] * m_)) - 1, 0, m_ - 1);
    }
    double total = 0.0;
    std::vector<int> idx(i0);
    while (true) {
        double overlap = 1.0;
        for (int d = 0; d < n_; ++d) {
            double a = std::max(lo[d], double(idx[d]) / m_);
            double b = std::min(hi[d], double(idx[d] + 1) / m_);
            overlap *= std::max(0.0, b - a);
        }
        std::size_t flat = 0;
        for (int d = 0; d < n_; ++d) flat = flat * std::size_t(m_) + idx[d];
        total += w_[flat] * overlap;
        int d = n_ - 1;
        while (d >= 0 && ++idx[d] > i1[d]) idx[d] = i0[d], --d;
        if (d < 0) break;
    }
    return total;
}

Marginal GridJoint::marginal(int j) const {
    std::vector<double> proj(m_, 0.0);
    std::vector<int> idx(n_, 0);
    double vol = std::pow(double(m_), -(n_ - 1));
    while (true) {
        std::size_t flat = 0;
        for (int d = 0; d < n_; ++d) flat = flat * std::size_t(m_) + idx[d];
        proj[idx[j]] += w_[flat] * vol;
        int d = n_ - 1;
        while (d >= 0 && ++idx[d] >= m_) idx[d] = 0, --d;
        if (d < 0) break;
    }
    return Marginal::grid(std::move(proj));
}

double GridJoint::entropy_bits() const {
    double vol = std::pow(double(m_), -n_);
    double h = 0.0;
    for (double f : w_)
        if (f > 0.0) h -= f * std::log2(f) * vol;
    return h;
}

void GridJoint::sample(std::span<const double> u, std::span<double> out) const {
    // Chain rule: draw X_0 from its marginal, then each next variable from
    // the conditional slice.
    std::vector<int> fixed;
    std::vector<double> colw(m_);
    for (int d = 0; d < n_; ++d) {
        for (int i = 0; i < m_; ++i) {
            double acc = 0.0;
            // Sum over the free trailing dimensions.
            int free = n_ - d - 1;
            std::vector<int> idx(free, 0);
            while (true) {
                std::size_t flat = 0;
                for (int k = 0; k < d; ++k)
                    flat = flat * std::size_t(m_) + fixed[k];
                flat = flat * std::size_t(m_) + i;
                for (int k = 0; k < free; ++k)
                    flat = flat * std::size_t(m_) + idx[k];
                acc += w_[flat];
                int k = free - 1;
                while (k >= 0 && ++idx[k] >= m_) idx[k] = 0, --k;
                if (k < 0 || free == 0) break;
            }
            colw[i] = acc;
        }
        double total = 0.0;
        for (double c : colw) total += c;
        double target = u[d] * total, acc = 0.0;
        int pick = m_ - 1;
        for (int i = 0; i < m_; ++i) {
            if (acc + colw[i] >= target) {
                pick = i;
                double frac = colw[i] > 0.0 ? (target - acc) / colw[i] : 0.5;
                out[d] = (double(pick) + frac) / double(m_);
                break;
            }
            acc += colw[i];
        }
        fixed.push_back(pick);
    }
}

void GridJoint::sample_given(int j, double x, std::span<const double> u,
                             std::span<double> out) const {
    int xi = std::clamp(int(x * m_), 0, m_ - 1);
    if (n_ == 2) {
        int other = 1 - j;
        (void)other;
        std::vector<double> colw(m_);
        for (int i = 0; i < m_; ++i) {
            std::size_t flat = j == 0 ? std::size_t(xi) * m_ + i
                                      : std::size_t(i) * m_ + xi;
            colw[i] = w_[flat];
        }
        double total = 0.0;
        for (double c : colw) total += c;
        if (total <= 0.0) throw DomainError("conditional slice has zero mass");
        double target = u[0] * total, acc = 0.0;
        for (int i = 0; i < m_; ++i) {
            if (acc + colw[i] >= target) {
                double frac = colw[i] > 0.0 ? (target - acc) / colw[i] : 0.5;
                out[0] = (double(i) + frac) / double(m_);
                return;
            }
            acc += colw[i];
        }
        out[0] = 1.0;
        return;
    }
    // n == 3: draw the two free variables in index order from the slice.
    std::vector<int> free_dims;
    for (int d = 0; d < 3; ++d)
        if (d != j) free_dims.push_back(d);
    auto flat3 = [&](int a, int b, int c) {
        return (std::size_t(a) * m_ + b) * std::size_t(m_) + c;
    };
    auto at = [&](int f0, int f1) {
        int idx[3];
        idx[j] = xi;
        idx[free_dims[0]] = f0;
        idx[free_dims[1]] = f1;
        return w_[flat3(idx[0], idx[1], idx[2])];
    };
    std::vector<double> rowsum(m_, 0.0);
    for (int a = 0; a < m_; ++a)
        for (int b = 0; b < m_; ++b) rowsum[a] += at(a, b);
    double total = 0.0;
    for (double r : rowsum) total += r;
    if (total <= 0.0) throw DomainError("conditional slice has zero mass");
    double target = u[0] * total, acc = 0.0;
    int a = m_ - 1;
    for (int i = 0; i < m_; ++i) {
        if (acc + rowsum[i] >= target) {
            a = i;
            double frac = rowsum[i] > 0.0 ? (target - acc) / rowsum[i] : 0.5;
            out[0] = (double(i) + frac) / double(m_);
            break;
        }
        acc += rowsum[i];
    }
    double target2 = u[1] * rowsum[a], acc2 = 0.0;
    for (int b = 0; b < m_; ++b) {
        if (acc2 + at(a, b) >= target2) {
            double frac = at(a, b) > 0.0 ? (target2 - acc2) / at(a, b) : 0.5;
            out[1] = (double(b) + frac) / double(m_);
            return;
        }
        acc2 += at(a, b);
    }
    out[1] = 1.0;
}

// ---------------------------------------------------------------------------
// SourceModel

SourceModel SourceModel::iid(Marginal m, int n) {
    if (n < 1) throw ConfigError("source needs n >= 1");
    SourceModel s;
    s.n_ = n;
    s.independent_ = true;
    s.marginals_.assign(std::size_t(n), m);
    return s;
}

SourceModel SourceModel::product(std::vector<Marginal> ms) {
    if (ms.empty()) throw ConfigError("source needs n >= 1");
    SourceModel s;
    s.n_ = int(ms.size());
    s.independent_ = true;
    s.marginals_ = std::move(ms);
    return s;
}

SourceModel SourceModel::joint(GridJoint j) {
    SourceModel s;
    s.n_ = j.dims();
    s.independent_ = false;
    for (int d = 0; d < s.n_; ++d) s.marginals_.push_back(j.marginal(d));
    s.joint_ = std::move(j);
    return s;
}

double SourceModel::joint_pdf(std::span<const double> x) const {
    if (joint_) return joint_->pdf(x);
    double f = 1.0;
    for (int j = 0; j < n_; ++j) f *= marginals_[j].pdf(x[j]);
    return f;
}

double SourceModel::box_prob(std::span<const double> lo,
                             std::span<const double> hi) const {
    if (joint_) return joint_->box_prob(lo, hi);
    double p = 1.0;
    for (int j = 0; j < n_; ++j)
        p *= std::max(0.0, marginals_[j].cdf(hi[j]) - marginals_[j].cdf(lo[j]));
    return p;
}

double SourceModel::joint_entropy_bits() const {
    if (joint_) return joint_->entropy_bits();
    double h = 0.0;
    for (int j = 0; j < n_; ++j) h += marginals_[j].entropy_bits();
    return h;
}

std::vector<double> SourceModel::sample(std::size_t count, std::uint64_t seed,
                                        int threads) const {
    std::vector<double> out(count * std::size_t(n_));
    int n_batches = int((count + kBatch - 1) / kBatch);
    parallel_batches(
        n_batches,
        [&](int b) {
            BatchRng rng(seed, std::uint64_t(b));
            std::size_t begin = std::size_t(b) * kBatch;
            std::size_t end = std::min(count, begin + kBatch);
            std::vector<double> u(std::size_t(n_), 0.0);
            for (std::size_t i = begin; i < end; ++i) {
                for (int d = 0; d < n_; ++d) u[std::size_t(d)] = rng.uniform();
                double* row = &out[i * std::size_t(n_)];
                if (joint_) {
                    joint_->sample(u, {row, std::size_t(n_)});
                } else {
                    for (int d = 0; d < n_; ++d)
                        row[d] = marginals_[d].inv_cdf(u[std::size_t(d)]);
                }
            }
        },
        threads);
    return out;
}

std::vector<double> SourceModel::sample_others_given(int j, double x,
                                                     std::size_t count,
                                                     std::uint64_t seed) const {
    if (n_ < 2) return {};
    std::size_t width = std::size_t(n_ - 1);
    std::vector<double> out(count * width);
    int n_batches = int((count + kBatch - 1) / kBatch);
    parallel_batches(n_batches, [&](int b) {
        BatchRng rng(seed, std::uint64_t(b));
        std::size_t begin = std::size_t(b) * kBatch;
        std::size_t end = std::min(count, begin + kBatch);
        std::vector<double> u(width);
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t d = 0; d < width; ++d) u[d] = rng.uniform();
            double* row = &out[i * width];
            if (joint_) {
                joint_->sample_given(j, x, u, {row, width});
            } else {
                std::size_t k = 0;
                for (int d = 0; d < n_; ++d) {
                    if (d == j) continue;
                    row[k] = marginals_[d].inv_cdf(u[k]);
                    ++k;
                }
            }
        }
    });
    return out;
}

}  // namespace dfsq
