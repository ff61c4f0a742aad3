#pragma once

#include <vector>

#include "dfsq/compander.hpp"
#include "dfsq/design.hpp"
#include "dfsq/distortion.hpp"
#include "dfsq/functions.hpp"
#include "dfsq/sources.hpp"

namespace dfsq {

/// Intervals where the sensitivity vanishes on positive probability. One
/// codeword covers each interval; fine quantization happens only outside,
/// where the leftover rate is amplified by rho = 1 / P{outside}.
struct DontCareSpec {
    int j = 0;
    std::vector<Interval> intervals;   // the zero-sensitivity regions Z
    double p_active = 1.0;             // P{X_j outside Z}
    double rho = 1.0;                  // 1 / p_active
    double indicator_bits = 0.0;       // H of {active, Z_1, ..., Z_M}
    std::vector<double> interval_prob;

    bool empty() const { return intervals.empty(); }
};

/// Scans a tabulated profile for maximal zero runs (>= 4 grid points wide,
/// probability >= 1e-4). Interval edges are the outermost zero nodes.
DontCareSpec detect(const SensitivityProfile& profile, const Marginal& f);

/// Quantizer with one codeword pinned to each don't-care interval and
/// K - M companding cells spread over the complement.
struct DontCareQuantizer {
    DontCareSpec spec;
    std::vector<Interval> active;      // complement of Z, sorted
    std::vector<double> fine_edges;    // boundaries within the active region
    std::vector<double> fine_codes;    // companded midpoints (active region)
    std::vector<double> interval_codes;  // conditional means of X on each Z

    int fine_cells() const { return int(fine_codes.size()); }
    // Cell ids: 0..M-1 are the intervals; M.. are fine cells.
    int quantize(double x) const;
    double reconstruct(int cell) const;
};

DontCareQuantizer build_dontcare_quantizer(const DontCareSpec& spec,
                                           const PointDensity& lambda_active,
                                           const Marginal& f, int K);

/// Predicted variable-rate distortion with per-variable rate amplification:
/// D = (1/12) sum_j rho_j^{-1} 2^{-2 (rho_j (a_j R - H_j) + h(X_j|A_j)
///                                  + E[log gamma_j | A_j])}.
double vr_distortion_amplified(const std::vector<DontCareSpec>& specs,
                               const std::vector<SensitivityProfile>& profiles,
                               const SourceModel& src,
                               std::span<const double> alpha, double R);

struct DontCareSweepRow {
    double R = 0.0;
    double D_emp = 0.0;
    double stderr_emp = 0.0;
};

struct DontCareSweep {
    Regime regime = Regime::Variable;
    std::vector<DontCareSweepRow> rows;
    double slope = 0.0;     // least-squares slope of log2 D vs R
    double constant = 0.0;  // geometric mean of D * 2^{-nominal_slope * R}
    double nominal_slope = 0.0;
};

/// Two-stage scheme (indicator, then conditional fine quantization) measured
/// by Monte Carlo across rates. Variable regime spends 2^{rho (R - H_I)}
/// fine cells; fixed regime spends 2^R - M.
DontCareSweep simulate_dontcare(const DontCareSpec& spec,
                                const SourceModel& src, const FunctionModel& g,
                                const std::vector<double>& rates,
                                std::size_t samples, std::uint64_t seed,
                                Regime regime = Regime::Variable);

}  // namespace dfsq
