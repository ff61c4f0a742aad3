#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dfsq/common.hpp"
#include "dfsq/grid_fn.hpp"

namespace dfsq {

/// Normalized point density on [0,1]. Backed either by a callable (exact,
/// integrated on demand) or by a tabulated grid (piecewise linear).
class PointDensity {
public:
    static PointDensity from_callable(std::function<double(double)> pdf);
    static PointDensity from_grid(GridFunction values);

    double operator()(double x) const;
    bool is_grid() const { return bool(grid_); }
    const GridFunction* grid() const { return grid_.get(); }
    // Raw callable before normalization (callable-backed only).
    const std::function<double(double)>& raw() const { return raw_; }
    double normalizer() const { return z_; }

private:
    PointDensity() = default;
    std::function<double(double)> raw_;
    double z_ = 1.0;
    std::shared_ptr<GridFunction> grid_;
};

/// Compander w(x) = cumulative integral of a point density: w(0)=0, w(1)=1,
/// nondecreasing. Callable densities get a cumulative table whose nodes are
/// integrated adaptively (~1e-13 per cell); inside a cell the density is
/// interpolated linearly, giving a closed-form quadratic segment. inverse()
/// solves the quadratic and, at tolerances below 1e-9, polishes by bisection
/// against the exact local integral. Grid densities use the same quadratic
/// cumulative, which is exact for the interpolant.
class Compander {
public:
    static Compander build(const PointDensity& density);
    // Wrap a known antiderivative directly (must map [0,1] onto [0,1]).
    static Compander from_w(std::function<double(double)> w);

    double w(double x) const;                       // exact path
    double inverse(double u, double tol = 1e-12) const;  // bisection-based

private:
    Compander() = default;
    double w_fast(double x) const;
    double w_exact(double x) const;

    std::function<double(double)> closed_w_;  // closed-form mode
    std::function<double(double)> pdf_;       // callable mode (unnormalized)
    std::vector<double> nodes_w_;             // cumulative at i/cells
    std::vector<double> nodes_pdf_;           // density at i/cells
    double total_ = 1.0;
    std::size_t cells_ = 0;
};

/// K-cell scalar quantizer realized through a compander. Cells are
/// right-closed: cell i covers (b_i, b_{i+1}], and x = 0 lands in cell 0.
class CompandingQuantizer {
public:
    static CompandingQuantizer build(const Compander& c, int K,
                                     double tol = 1e-12);
    static CompandingQuantizer uniform(int K);
    static CompandingQuantizer from_boundaries(std::vector<double> b);

    int K() const { return int(codewords_.size()); }
    const std::vector<double>& boundaries() const { return b_; }
    const std::vector<double>& codewords() const { return codewords_; }

    int quantize(double x) const;  // 0-based cell index
    double reconstruct(int cell) const { return codewords_.at(std::size_t(cell)); }

    /// Replaces the interior boundary nearest to t with t (codewords of the
    /// two touched cells move to their cell midpoints). Used to pin quantizer
    /// edges at discontinuities of the function of interest.
    void pin_boundary(double t);

private:
    std::vector<double> b_;          // K+1, strictly increasing, 0..1
    std::vector<double> codewords_;  // K, companded midpoints
};

struct Interval {
    double lo = 0.0, hi = 0.0;
    double length() const { return hi - lo; }
};

/// Continuous piecewise-monotone map on [0,1] used for non-regular
/// quantization: intervals sharing w-values are binned into one cell.
class GeneralizedCompander {
public:
    // `breaks` are the piece edges (first 0, last 1); w must be continuous
    // at the junctions and strictly monotone inside each piece.
    GeneralizedCompander(std::function<double(double)> w,
                         std::vector<double> breaks);

    double w(double x) const { return w_(x); }
    const std::vector<double>& breaks() const { return breaks_; }
    double w_min() const { return wmin_; }
    double w_max() const { return wmax_; }
    static constexpr int kMaxPieces = 64;

    // Preimage of [ulo, uhi] within piece p (monotone bisection).
    std::optional<Interval> piece_preimage(std::size_t p, double ulo,
                                           double uhi) const;

private:
    std::function<double(double)> w_;
    std::vector<double> breaks_;
    double wmin_ = 0.0, wmax_ = 1.0;
};

/// Non-regular quantizer induced by uniformly quantizing w(x): each cell is
/// a finite union of intervals.
class NonRegularQuantizer {
public:
    int K() const { return K_; }
    const std::vector<Interval>& cell(int i) const {
        return cells_.at(std::size_t(i));
    }
    int quantize(double x) const;

    friend NonRegularQuantizer bin_map(const GeneralizedCompander& gc, int K);

private:
    int K_ = 0;
    double wmin_ = 0.0, span_ = 1.0;
    std::function<double(double)> w_;
    std::vector<std::vector<Interval>> cells_;
};

NonRegularQuantizer bin_map(const GeneralizedCompander& gc, int K);

/// n separately-applied companding quantizers with fractional allocation
/// alpha and total resolution K: variable j gets floor(K^alpha_j) cells.
class DistributedQuantizer {
public:
    DistributedQuantizer(std::vector<CompandingQuantizer> qs,
                         std::vector<double> alpha, double K);

    int n() const { return int(q_.size()); }
    const CompandingQuantizer& quantizer(int j) const {
        return q_.at(std::size_t(j));
    }
    const std::vector<double>& alpha() const { return alpha_; }
    double total_resolution() const { return K_; }
    std::vector<int> resolutions() const;

    void quantize(std::span<const double> x, std::span<int> cells) const;
    void reconstruct(std::span<const int> cells, std::span<double> out) const;

    static std::vector<int> marginal_resolutions(double K,
                                                 std::span<const double> alpha);

private:
    std::vector<CompandingQuantizer> q_;
    std::vector<double> alpha_;
    double K_ = 1.0;
};

/// Builds the per-variable quantizers from densities at total resolution K.
DistributedQuantizer build_distributed(const std::vector<PointDensity>& lambdas,
                                       std::span<const double> alpha, double K);

}  // namespace dfsq
