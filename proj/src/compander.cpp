#include "dfsq/compander.hpp"

#include <algorithm>
#include <cmath>

#include "dfsq/quadrature.hpp"

namespace dfsq {

// ---------------------------------------------------------------------------
// PointDensity

PointDensity PointDensity::from_callable(std::function<double(double)> pdf) {
    PointDensity d;
    d.raw_ = std::move(pdf);
    d.z_ = integrate(d.raw_, 0.0, 1.0, 1e-12);
    if (!(d.z_ > 0.0) || !std::isfinite(d.z_))
        throw NumericError("point density has non-positive or divergent mass");
    return d;
}

PointDensity PointDensity::from_grid(GridFunction values) {
    for (double v : values.v)
        if (v < 0.0 || !std::isfinite(v))
            throw NumericError("point density values must be finite and >= 0");
    PointDensity d;
    double z = values.integral();
    if (!(z > 0.0)) throw NumericError("point density has zero mass");
    values.scale(1.0 / z);
    d.grid_ = std::make_shared<GridFunction>(std::move(values));
    d.z_ = 1.0;
    auto g = d.grid_;
    d.raw_ = [g](double x) { return (*g)(x); };
    return d;
}

double PointDensity::operator()(double x) const { return raw_(x) / z_; }

// ---------------------------------------------------------------------------
// Compander

Compander Compander::build(const PointDensity& density) {
    Compander c;
    if (density.is_grid()) {
        // The grid nodes are exact breakpoints; the quadratic cumulative is
        // exact for the interpolant, so no refinement pass is ever needed.
        const GridFunction& g = *density.grid();
        c.cells_ = g.size() - 1;
        c.nodes_pdf_ = g.v;
        c.nodes_w_.assign(g.size(), 0.0);
        double h = g.step();
        for (std::size_t i = 0; i + 1 < g.size(); ++i)
            c.nodes_w_[i + 1] =
                c.nodes_w_[i] + 0.5 * h * (g.v[i] + g.v[i + 1]);
        c.total_ = c.nodes_w_.back();
        c.pdf_ = nullptr;
    } else {
        constexpr std::size_t kCells = 4096;
        c.cells_ = kCells;
        c.pdf_ = density.raw();
        c.nodes_pdf_.resize(kCells + 1);
        c.nodes_w_.assign(kCells + 1, 0.0);
        for (std::size_t i = 0; i <= kCells; ++i)
            c.nodes_pdf_[i] = c.pdf_(double(i) / kCells);
        for (std::size_t i = 0; i < kCells; ++i)
            c.nodes_w_[i + 1] =
                c.nodes_w_[i] + integrate(c.pdf_, double(i) / kCells,
                                          double(i + 1) / kCells, 1e-14, 36);
        c.total_ = c.nodes_w_.back();
    }
    if (!(c.total_ > 0.0))
        throw NumericError("compander: density integrates to zero");
    return c;
}

Compander Compander::from_w(std::function<double(double)> w) {
    if (std::fabs(w(0.0)) > 1e-9 || std::fabs(w(1.0) - 1.0) > 1e-9)
        throw DomainError("compander must satisfy w(0)=0, w(1)=1");
    Compander c;
    c.closed_w_ = std::move(w);
    return c;
}

double Compander::w_fast(double x) const {
    double h = 1.0 / double(cells_);
    double t = x * double(cells_);
    auto i = std::min<std::size_t>(cells_ - 1, std::size_t(t));
    double f = t - double(i);
    double seg = h * (nodes_pdf_[i] * f +
                      0.5 * (nodes_pdf_[i + 1] - nodes_pdf_[i]) * f * f);
    return (nodes_w_[i] + seg) / total_;
}

double Compander::w_exact(double x) const {
    if (!pdf_) return w_fast(x);  // grid mode: the quadratic is exact
    double h = 1.0 / double(cells_);
    auto i = std::min<std::size_t>(cells_ - 1, std::size_t(x * double(cells_)));
    return (nodes_w_[i] + integrate(pdf_, double(i) * h, x, 1e-14, 36)) /
           total_;
}

double Compander::w(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (closed_w_) return closed_w_(x);
    return w_exact(x);
}

double Compander::inverse(double u, double tol) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    if (closed_w_) {
        double lo = 0.0, hi = 1.0;
        while (hi - lo > tol) {
            double mid = 0.5 * (lo + hi);
            (closed_w_(mid) < u ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
    // Bracket in the cumulative table, then bisect the quadratic segment
    // (cheap, exact for the interpolated density).
    double target = u * total_;
    auto it = std::upper_bound(nodes_w_.begin(), nodes_w_.end(), target);
    std::size_t i = it == nodes_w_.begin()
                        ? 0
                        : std::min<std::size_t>(cells_ - 1,
                                                std::size_t(it - nodes_w_.begin() - 1));
    double h = 1.0 / double(cells_);
    double a = double(i) * h, b = a + h;
    double lo = a, hi = b;
    while (hi - lo > std::max(tol, 1e-13)) {
        double mid = 0.5 * (lo + hi);
        (w_fast(mid) < u ? lo : hi) = mid;
    }
    double x = 0.5 * (lo + hi);
    if (!pdf_ || tol >= 1e-9) return x;
    // Polish against the exact local integral; the fast solution is within
    // ~1e-9, so the bracket stays tiny.
    double delta = 4e-9;
    lo = std::max(a, x - delta);
    hi = std::min(b, x + delta);
    int widen = 0;
    while (w_exact(lo) > u && lo > a && widen++ < 8)
        lo = std::max(a, lo - delta), delta *= 4.0;
    delta = 4e-9;
    widen = 0;
    while (w_exact(hi) < u && hi < b && widen++ < 8)
        hi = std::min(b, hi + delta), delta *= 4.0;
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        (w_exact(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// CompandingQuantizer

CompandingQuantizer CompandingQuantizer::build(const Compander& c, int K,
                                               double tol) {
    if (K < 1) throw DomainError("quantizer needs K >= 1");
    CompandingQuantizer q;
    q.b_.resize(std::size_t(K) + 1);
    q.codewords_.resize(std::size_t(K));
    q.b_[0] = 0.0;
    q.b_[std::size_t(K)] = 1.0;
    for (int i = 1; i < K; ++i)
        q.b_[std::size_t(i)] = c.inverse(double(i) / double(K), tol);
    for (int i = 0; i < K; ++i)
        q.codewords_[std::size_t(i)] =
            c.inverse((2.0 * double(i) + 1.0) / (2.0 * double(K)), tol);
    for (int i = 0; i < K; ++i)
        if (!(q.b_[std::size_t(i)] < q.b_[std::size_t(i) + 1]))
            throw NumericError(
                "degenerate quantizer cell (K too large for this density?)");
    return q;
}

CompandingQuantizer CompandingQuantizer::uniform(int K) {
    if (K < 1) throw DomainError("quantizer needs K >= 1");
    CompandingQuantizer q;
    q.b_.resize(std::size_t(K) + 1);
    q.codewords_.resize(std::size_t(K));
    for (int i = 0; i <= K; ++i) q.b_[std::size_t(i)] = double(i) / double(K);
    for (int i = 0; i < K; ++i)
        q.codewords_[std::size_t(i)] = (2.0 * double(i) + 1.0) / (2.0 * K);
    return q;
}

CompandingQuantizer CompandingQuantizer::from_boundaries(std::vector<double> b) {
    if (b.size() < 2 || b.front() != 0.0 || b.back() != 1.0)
        throw DomainError("boundaries must run from 0 to 1");
    CompandingQuantizer q;
    q.b_ = std::move(b);
    q.codewords_.resize(q.b_.size() - 1);
    for (std::size_t i = 0; i + 1 < q.b_.size(); ++i) {
        if (!(q.b_[i] < q.b_[i + 1]))
            throw DomainError("boundaries must be strictly increasing");
        q.codewords_[i] = 0.5 * (q.b_[i] + q.b_[i + 1]);
    }
    return q;
}

int CompandingQuantizer::quantize(double x) const {
    if (x < 0.0 || x > 1.0) throw DomainError("quantize: input outside [0,1]");
    if (x <= b_[1]) return 0;  // includes x = 0
    // Right-closed cells: the index i with b_i < x <= b_{i+1}.
    auto it = std::lower_bound(b_.begin(), b_.end(), x);
    return int(it - b_.begin()) - 1;
}

void CompandingQuantizer::pin_boundary(double t) {
    if (t <= 0.0 || t >= 1.0)
        throw DomainError("pin_boundary needs t in (0,1)");
    std::size_t best = 1;
    double dist = std::fabs(b_[1] - t);
    for (std::size_t i = 2; i + 1 < b_.size(); ++i) {
        double d = std::fabs(b_[i] - t);
        if (d < dist) {
            dist = d;
            best = i;
        }
    }
    b_[best] = t;
    codewords_[best - 1] = 0.5 * (b_[best - 1] + b_[best]);
    codewords_[best] = 0.5 * (b_[best] + b_[best + 1]);
}

// ---------------------------------------------------------------------------
// GeneralizedCompander / NonRegularQuantizer

GeneralizedCompander::GeneralizedCompander(std::function<double(double)> w,
                                           std::vector<double> breaks)
    : w_(std::move(w)), breaks_(std::move(breaks)) {
    if (breaks_.size() < 2 || breaks_.front() != 0.0 || breaks_.back() != 1.0)
        throw DomainError("piece edges must run from 0 to 1");
    if (int(breaks_.size()) - 1 > kMaxPieces)
        throw DomainError("too many compander pieces");
    for (std::size_t p = 0; p + 1 < breaks_.size(); ++p) {
        double a = breaks_[p], b = breaks_[p + 1];
        if (!(b > a)) throw DomainError("piece edges must increase");
        double eps = 1e-9 * (b - a);
        if (std::fabs(w_(a + eps) - w_(a)) > 1e-6 ||
            std::fabs(w_(b - eps) - w_(b)) > 1e-6)
            throw DomainError(
                "compander pieces are not continuous at junctions");
    }
    wmin_ = w_(breaks_[0]);
    wmax_ = wmin_;
    for (double b : breaks_) {
        wmin_ = std::min(wmin_, w_(b));
        wmax_ = std::max(wmax_, w_(b));
    }
}

std::optional<Interval> GeneralizedCompander::piece_preimage(
    std::size_t p, double ulo, double uhi) const {
    double a = breaks_.at(p), b = breaks_.at(p + 1);
    double wa = w_(a), wb = w_(b);
    bool rising = wb >= wa;
    double plo = std::min(wa, wb), phi = std::max(wa, wb);
    double qlo = std::max(plo, ulo), qhi = std::min(phi, uhi);
    if (qlo >= qhi) return std::nullopt;
    auto solve = [&](double target) {
        double lo = a, hi = b;
        for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo + hi);
            bool below = rising ? (w_(mid) < target) : (w_(mid) > target);
            (below ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    double x1 = qlo <= plo ? (rising ? a : b) : solve(qlo);
    double x2 = qhi >= phi ? (rising ? b : a) : solve(qhi);
    if (x1 > x2) std::swap(x1, x2);
    return Interval{x1, x2};
}

NonRegularQuantizer bin_map(const GeneralizedCompander& gc, int K) {
    if (K < 1) throw DomainError("bin_map needs K >= 1");
    NonRegularQuantizer q;
    q.K_ = K;
    q.wmin_ = gc.w_min();
    q.span_ = gc.w_max() - gc.w_min();
    if (!(q.span_ > 0.0)) throw DomainError("compander has zero range");
    // Capture by value so the quantizer is self-contained.
    auto wfn = gc;
    q.w_ = [wfn](double x) { return wfn.w(x); };
    q.cells_.assign(std::size_t(K), {});
    std::size_t pieces = gc.breaks().size() - 1;
    for (int i = 0; i < K; ++i) {
        double ulo = q.wmin_ + q.span_ * double(i) / double(K);
        double uhi = q.wmin_ + q.span_ * double(i + 1) / double(K);
        auto& cell = q.cells_[std::size_t(i)];
        for (std::size_t p = 0; p < pieces; ++p)
            if (auto iv = gc.piece_preimage(p, ulo, uhi)) cell.push_back(*iv);
        std::sort(cell.begin(), cell.end(),
                  [](const Interval& a, const Interval& b) {
                      return a.lo < b.lo;
                  });
        // Merge touching pieces (folds produce adjacent half-intervals).
        std::vector<Interval> merged;
        for (const auto& iv : cell) {
            if (!merged.empty() && iv.lo <= merged.back().hi + 1e-12)
                merged.back().hi = std::max(merged.back().hi, iv.hi);
            else
                merged.push_back(iv);
        }
        cell = std::move(merged);
    }
    return q;
}

int NonRegularQuantizer::quantize(double x) const {
    if (x < 0.0 || x > 1.0) throw DomainError("quantize: input outside [0,1]");
    double u = (w_(x) - wmin_) / span_;
    // Right-closed convention on the companded axis; u = 0 joins cell 0.
    int i = int(std::ceil(u * double(K_))) - 1;
    return std::clamp(i, 0, K_ - 1);
}

// ---------------------------------------------------------------------------
// DistributedQuantizer

DistributedQuantizer::DistributedQuantizer(std::vector<CompandingQuantizer> qs,
                                           std::vector<double> alpha, double K)
    : q_(std::move(qs)), alpha_(std::move(alpha)), K_(K) {
    if (q_.size() != alpha_.size())
        throw DomainError("one allocation entry per quantizer required");
    double sum = 0.0;
    for (double a : alpha_) {
        if (!(a > 0.0)) throw DomainError("allocation entries must be > 0");
        sum += a;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw DomainError("allocation must sum to 1");
}

std::vector<int> DistributedQuantizer::resolutions() const {
    std::vector<int> r;
    r.reserve(q_.size());
    for (const auto& q : q_) r.push_back(q.K());
    return r;
}

void DistributedQuantizer::quantize(std::span<const double> x,
                                    std::span<int> cells) const {
    for (std::size_t j = 0; j < q_.size(); ++j) cells[j] = q_[j].quantize(x[j]);
}

void DistributedQuantizer::reconstruct(std::span<const int> cells,
                                       std::span<double> out) const {
    for (std::size_t j = 0; j < q_.size(); ++j)
        out[j] = q_[j].reconstruct(cells[j]);
}

std::vector<int> DistributedQuantizer::marginal_resolutions(
    double K, std::span<const double> alpha) {
    std::vector<int> r;
    r.reserve(alpha.size());
    for (double a : alpha) {
        double kj = std::floor(std::pow(K, a) * (1.0 + 1e-12));
        r.push_back(std::max(1, int(kj)));
    }
    return r;
}

DistributedQuantizer build_distributed(const std::vector<PointDensity>& lambdas,
                                       std::span<const double> alpha,
                                       double K) {
    auto kj = DistributedQuantizer::marginal_resolutions(K, alpha);
    std::vector<CompandingQuantizer> qs;
    qs.reserve(lambdas.size());
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
        Compander c = Compander::build(lambdas[j]);
        qs.push_back(CompandingQuantizer::build(c, kj[j]));
    }
    return DistributedQuantizer(std::move(qs),
                                std::vector<double>(alpha.begin(), alpha.end()),
                                K);
}

}  // namespace dfsq
