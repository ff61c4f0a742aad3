#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfsq/common.hpp"
#include "dfsq/grid_fn.hpp"

namespace dfsq {

/// One source variable on [0,1]: pdf, cdf, quantile, differential entropy.
/// The cdf is either closed-form or built once by quadrature on a fine grid.
class Marginal {
public:
    Marginal(std::string kind, std::function<double(double)> pdf,
             std::function<double(double)> cdf = nullptr);

    const std::string& kind() const { return kind_; }
    double pdf(double x) const { return pdf_(x); }
    double cdf(double x) const;
    double inv_cdf(double u) const;  // monotone bisection, |cdf(x)-u| <= 1e-12
    double entropy_bits() const;     // h(X) = -Integral f log2 f

    // Range of the pdf over [lo, hi]; exact for the monotone built-ins,
    // node-scan for grid pdfs.
    std::pair<double, double> pdf_range(double lo, double hi) const;

    static Marginal uniform();
    static Marginal power(int k);  // pdf (k+1) x^k, cdf x^{k+1}
    static Marginal grid(std::vector<double> weights);  // piecewise constant

private:
    std::string kind_;
    std::function<double(double)> pdf_;
    std::function<double(double)> cdf_;
    std::function<double(double)> inv_;           // closed inverse if known
    mutable std::optional<double> entropy_cache_;
    std::shared_ptr<GridFunction> cdf_tab_;       // quadrature-built fallback
    bool monotone_pdf_ = false;
};

/// Piecewise-constant joint density on [0,1]^n (n = 2 or 3) over an m^n grid.
/// Box probabilities are exact via cumulative sums.
class GridJoint {
public:
    GridJoint(int n, int m, std::vector<double> weights);

    int dims() const { return n_; }
    int grid() const { return m_; }
    double pdf(std::span<const double> x) const;
    double box_prob(std::span<const double> lo, std::span<const double> hi) const;
    Marginal marginal(int j) const;
    double entropy_bits() const;  // h(X_1^n), exact for the step density

    // Inverse-transform sampling: n uniforms in, one point out.
    void sample(std::span<const double> u, std::span<double> out) const;
    // Conditional draw of the other variables given X_j = x.
    void sample_given(int j, double x, std::span<const double> u,
                      std::span<double> out) const;

private:
    double cell_mass(const std::vector<int>& idx) const;
    int n_, m_;
    std::vector<double> w_;  // normalized: sum w * m^-n = 1
};

/// Immutable source model: either an independent product of marginals or a
/// small grid-defined joint. Sampling is stateless given (seed, batch).
class SourceModel {
public:
    static SourceModel iid(Marginal m, int n);
    static SourceModel product(std::vector<Marginal> ms);
    static SourceModel joint(GridJoint j);

    int n() const { return n_; }
    bool independent() const { return independent_; }
    const Marginal& marginal(int j) const { return marginals_.at(j); }
    const GridJoint* grid_joint() const { return joint_ ? &*joint_ : nullptr; }

    double joint_pdf(std::span<const double> x) const;
    double box_prob(std::span<const double> lo, std::span<const double> hi) const;
    double joint_entropy_bits() const;  // sum of marginals when independent

    /// Deterministic for fixed seed; batch layout is row-major count x n.
    std::vector<double> sample(std::size_t count, std::uint64_t seed,
                               int threads = 0) const;

    /// Draws of {X_i}_{i != j} given X_j = x, row-major count x (n-1).
    std::vector<double> sample_others_given(int j, double x, std::size_t count,
                                            std::uint64_t seed) const;

    static constexpr std::size_t kBatch = std::size_t(1) << 14;

private:
    SourceModel() = default;
    int n_ = 1;
    bool independent_ = true;
    std::vector<Marginal> marginals_;
    std::optional<GridJoint> joint_;
};

}  // namespace dfsq
