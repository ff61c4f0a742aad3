#pragma once

#include <vector>

#include "dfsq/compander.hpp"
#include "dfsq/design.hpp"
#include "dfsq/distortion.hpp"
#include "dfsq/functions.hpp"
#include "dfsq/sources.hpp"

namespace dfsq {

struct EquivalenceStat {
    double v = 0.0;   // E[var(g | X_j in {s,t}, others)]
    double se = 0.0;
};

/// Monte Carlo estimate of the two-point conditional functional variance.
/// v = 0 (within noise) flags (s, t) as a candidate equivalence pair.
EquivalenceStat equivalence_statistic(const FunctionModel& g,
                                      const SourceModel& src, int j, double s,
                                      double t, std::size_t mc_samples = 1 << 14,
                                      std::uint64_t seed = 17);

/// Mirror pairing s <-> 2*center - s on [lo, hi]; points outside stay
/// unpaired (monotone tail).
struct MirrorPairing {
    double center = 0.5;
    double lo = 0.0;
    double hi = 1.0;
    double map(double s) const { return 2.0 * center - s; }
};

/// Builds a piecewise-monotone compander that bins every pair of the mirror
/// map into one value and follows the sensitivity profile in slope
/// magnitude; the range is normalized to [0,1]. Construction is refused if
/// sampled pairs fail the equivalence test.
GeneralizedCompander build_binning_compander(const FunctionModel& g,
                                             const SourceModel& src, int j,
                                             const MirrorPairing& pairing,
                                             std::size_t mc_samples = 1 << 14,
                                             std::uint64_t seed = 17);

struct FloorSweepRow {
    double rate_per_variable = 0.0;
    double D_binned = 0.0;
    double D_regular = 0.0;
};

struct FloorSweep {
    std::vector<FloorSweepRow> rows;
    bool binned_plateaus = false;    // last two binned points within 10%
    double regular_drop = 0.0;       // min ratio D(r)/D(r+1) for the regular
    double binned_last_ratio = 0.0;  // final two binned points
};

/// Fixed-rate sweep comparing non-regular (binned) quantization of variable
/// j against the regular design, n = 2. Exposes the distortion floor for
/// equivalence-free functions and its absence for genuinely binnable ones.
FloorSweep distortion_floor_demo(const FunctionModel& g, const SourceModel& src,
                                 const GeneralizedCompander& binning,
                                 const std::vector<double>& rates,
                                 std::size_t samples, std::uint64_t seed,
                                 int threads = 0);

/// CSV-ready scan of v_j(s, t) over a uniform grid of pairs.
std::vector<std::vector<EquivalenceStat>> equivalence_scan(
    const FunctionModel& g, const SourceModel& src, int j, int grid = 64,
    std::size_t mc_samples = 1 << 12, std::uint64_t seed = 17);

}  // namespace dfsq
