#pragma once

#include <span>
#include <vector>

#include "dfsq/compander.hpp"
#include "dfsq/design.hpp"
#include "dfsq/sources.hpp"

namespace dfsq {

/// Exact output entropy H(Q(X_j)) in bits; cell probabilities come from cdf
/// differences, never from sampling. Zero-probability cells contribute 0.
double output_entropy(const CompandingQuantizer& q, const SourceModel& src,
                      int j);

/// High-resolution entropy approximation h(X_j) + log2 K + E[log2 lambda].
double hr_entropy(const PointDensity& lambda, const SourceModel& src, int j,
                  double K);

struct Resolution {
    double log2_K = 0.0;          // total resolution, log2
    std::vector<int> per_variable;
    double achieved_bits = 0.0;   // rate of the reported resolution
    bool scan_fallback = false;   // entropy non-monotone across the stride
};

/// Largest resolution whose rate fits in `total_rate` for the regime.
/// Fixed: floor(2^R). Variable: sum of marginal output entropies. Slepian-
/// Wolf: joint output entropy (independent sources or n <= 3 grid joints).
Resolution resolution_for_rate(Regime regime,
                               const std::vector<PointDensity>& lambdas,
                               const SourceModel& src,
                               std::span<const double> alpha,
                               double total_rate);

/// Exact joint output entropy of the distributed quantizer. Independent
/// sources reduce to the sum of marginal entropies; grid joints enumerate
/// product cells (guarded at 2^24 cells).
double joint_entropy(const DistributedQuantizer& dq, const SourceModel& src);

struct RateReport {
    Regime regime = Regime::Fixed;
    double R = 0.0;          // requested rate
    double log2_K = 0.0;
    double exact_bits = 0.0;
    double hr_bits = 0.0;
    double gap_bits = 0.0;
    std::vector<int> per_variable;
};

RateReport rate_report(Regime regime, const std::vector<PointDensity>& lambdas,
                       const SourceModel& src, std::span<const double> alpha,
                       double total_rate);

}  // namespace dfsq
