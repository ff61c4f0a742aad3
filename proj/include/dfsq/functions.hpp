#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfsq/common.hpp"
#include "dfsq/grid_fn.hpp"
#include "dfsq/sources.hpp"

namespace dfsq {

struct PartialBounds {
    double lo = 0.0;  // inf |dg/dx_j| over the box
    double hi = 0.0;  // sup |dg/dx_j| over the box
    bool valid = false;
};

/// Function of interest g on [0,1]^n with per-variable partials. A partial
/// returns NaN where undefined (measure-zero sets); Monte Carlo averages skip
/// those points.
struct FunctionModel {
    int n = 1;
    std::string name;
    std::function<double(std::span<const double>)> eval;
    std::function<double(int, std::span<const double>)> partial;
    // Closed-form sensitivity profile for a given source; empty when no
    // closed form applies (falls back to Monte Carlo).
    std::function<std::optional<std::function<double(double)>>(
        int, const SourceModel&)>
        closed_gamma;
    // Exact range of |partial j| over an axis-aligned box, when available.
    std::function<PartialBounds(int, std::span<const double>,
                                std::span<const double>)>
        partial_bounds;
    double gradient_bound = 1.0;
};

FunctionModel make_linear(std::vector<double> coeffs);
FunctionModel make_square();                 // g(x) = x^2, n = 1
FunctionModel make_max(int n);
FunctionModel make_median(int n);            // n odd
FunctionModel make_min_clip();               // g(x) = min(x, 1/2), n = 1
FunctionModel make_quadrant(double L);       // n = 2, slope 1 or L by quadrant
FunctionModel make_sep_parabola();           // g = x1 (3/4 - x1)(1 - x2)

/// Lookup by registry name; params: linear coefficients or L, n as needed.
FunctionModel make_function(const std::string& name, int n = 0,
                            const std::vector<double>& params = {});

/// Tabulated sensitivity profile gamma_j with per-point standard errors
/// (zero when a closed form was used). Values below 1e-12 are clamped to 0
/// so don't-care regions are detectable.
struct SensitivityProfile {
    int j = 0;
    GridFunction gamma;
    GridFunction se;
    bool closed_form = false;
    double max_se = 0.0;
    bool warn_noisy = false;  // requested tolerance not met, report-only

    double operator()(double x) const { return gamma(x); }
};

SensitivityProfile sensitivity_profile(const FunctionModel& g,
                                       const SourceModel& src, int j,
                                       std::size_t grid_nodes = 1025,
                                       std::size_t mc_samples = 1 << 16,
                                       std::uint64_t seed = 1,
                                       int threads = 0);

/// Binary partition event on a companion variable: Y = 1 iff X_var <= cut.
struct ThresholdEvent {
    int var = 1;
    double cut = 0.5;
};

SensitivityProfile conditional_sensitivity_profile(
    const FunctionModel& g, const SourceModel& src, int j,
    const ThresholdEvent& event, int y, std::size_t grid_nodes = 1025,
    std::size_t mc_samples = 1 << 16, std::uint64_t seed = 1);

}  // namespace dfsq
