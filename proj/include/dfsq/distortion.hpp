#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dfsq/compander.hpp"
#include "dfsq/design.hpp"
#include "dfsq/functions.hpp"
#include "dfsq/sources.hpp"

namespace dfsq {

/// Predicted distortion at resolution K (before any rate mapping):
/// sum_j E[(gamma_j/lambda_j)^2] / (12 K^{2 alpha_j}).
double hr_distortion_resolution(const std::vector<SensitivityProfile>& profiles,
                                const std::vector<PointDensity>& lambdas,
                                std::span<const double> alpha, double K,
                                const SourceModel& src);

/// Predicted distortion at total rate R from a finished design.
double hr_distortion_rate(const DesignResult& design, double R);

enum class EstimatorMode {
    Numeric,     // per-cell Gauss-Legendre conditional means, n <= 3
    MonteCarlo,  // sampled cell means; sparse cells fall back to g(recon)
    CellCenter,  // g evaluated at the companded reconstruction points
};

/// Decoder table of per-cell function estimates ghat = E[g | cells].
class EstimatorTable {
public:
    double estimate(std::span<const int> cells,
                    std::span<const double> recon) const;
    EstimatorMode mode() const { return mode_; }
    std::size_t flagged_cells() const { return flagged_; }

    friend EstimatorTable estimator_table(const DistributedQuantizer& dq,
                                          const SourceModel& src,
                                          const FunctionModel& g,
                                          EstimatorMode mode,
                                          std::size_t mc_samples,
                                          std::uint64_t seed);

private:
    EstimatorMode mode_ = EstimatorMode::CellCenter;
    const FunctionModel* g_ = nullptr;
    std::vector<std::size_t> strides_;
    std::vector<double> dense_;               // numeric mode
    std::unordered_map<std::size_t, double> sparse_;  // monte-carlo mode
    std::size_t flagged_ = 0;
};

EstimatorTable estimator_table(const DistributedQuantizer& dq,
                               const SourceModel& src, const FunctionModel& g,
                               EstimatorMode mode,
                               std::size_t mc_samples = 1 << 20,
                               std::uint64_t seed = 7);

struct DistortionReport {
    Regime regime = Regime::Fixed;
    double R = 0.0;
    double log2_K = 0.0;
    double D_hr = 0.0;
    double D_emp = 0.0;
    double stderr_emp = 0.0;
    double ratio = 0.0;  // D_emp / D_hr
};

/// Monte Carlo functional distortion E[(g - ghat)^2] with batch-mean
/// standard errors; deterministic for a fixed seed.
DistortionReport empirical_distortion(const DistributedQuantizer& dq,
                                      const SourceModel& src,
                                      const FunctionModel& g,
                                      const EstimatorTable& est,
                                      std::size_t samples, std::uint64_t seed,
                                      int threads = 0, double d_hr = 0.0);

/// Envelopes on var(g | X in cell) for a rectangular cell, from the ranges
/// of |dg/dx_j| and of the conditional density over the cell.
std::pair<double, double> cell_variance_bounds(const FunctionModel& g,
                                               std::span<const double> lo,
                                               std::span<const double> hi,
                                               const SourceModel& src);

}  // namespace dfsq
