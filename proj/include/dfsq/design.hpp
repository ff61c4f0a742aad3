#pragma once

#include <span>
#include <vector>

#include "dfsq/compander.hpp"
#include "dfsq/functions.hpp"
#include "dfsq/sources.hpp"

namespace dfsq {

enum class Regime { Fixed, Variable, SlepianWolf };

const char* regime_name(Regime r);
Regime regime_from_name(const std::string& name);

/// Fixed-rate optimal density: proportional to (gamma^2 f)^(1/3).
/// Throws DontCareRequired when gamma vanishes on positive probability.
PointDensity fixed_rate_density(const SensitivityProfile& gamma,
                                const Marginal& f);
PointDensity fixed_rate_density(const std::function<double(double)>& gamma,
                                const Marginal& f);

/// Variable-rate (and Slepian-Wolf) optimal density: proportional to gamma.
PointDensity variable_rate_density(const SensitivityProfile& gamma);
PointDensity variable_rate_density(const std::function<double(double)>& gamma);

/// Per-variable scalars entering the distortion-rate constants.
struct VariableConstants {
    double quasinorm_13 = 0.0;    // ||gamma^2 f||_{1/3}
    double gamma_l1 = 0.0;        // Integral of gamma
    double e_log2_gamma = 0.0;    // E[log2 gamma(X_j)]
    double h_bits = 0.0;          // h(X_j)
    double clamped_mass = 0.0;    // P{gamma below clamp}
};

VariableConstants variable_constants(const SensitivityProfile& gamma,
                                     const Marginal& f);
VariableConstants variable_constants(const std::function<double(double)>& gamma,
                                     const Marginal& f);

/// The constant c_j multiplying 2^{-2 alpha_j R}/12 in the per-variable
/// distortion term. Fixed: ||gamma^2 f||_{1/3}. Variable:
/// 2^{2 h(X_j) + 2 E[log2 gamma]} (the entropy-matched form; the L1 norm of
/// gamma cancels against the normalizer of the optimal density).
double distortion_constant(Regime regime, const VariableConstants& vc);

/// Closed-form rate split of Huang-Schultheiss type for D = sum c_j 2^{-2Rj}
/// under sum Rj <= n * rate_per_variable. Negative R_j are reported, not
/// clipped, unless clip_nonnegative is set (iterative active-set variant,
/// not part of the high-resolution theory).
struct Allocation {
    std::vector<double> rate;   // R_j
    std::vector<double> alpha;  // R_j / sum R_j (valid iff all R_j > 0)
    double distortion = 0.0;    // n (prod c)^{1/n} 2^{-2 rate_per_variable}
    bool has_nonpositive = false;
};

Allocation allocate(std::span<const double> c, double rate_per_variable,
                    bool clip_nonnegative = false);

struct DesignProblem {
    const SourceModel* source = nullptr;
    const FunctionModel* function = nullptr;
    Regime regime = Regime::Fixed;
    double total_rate = 8.0;  // bits across all variables
    std::size_t grid_nodes = 1025;
    std::size_t mc_samples = 1 << 16;
    std::uint64_t seed = 1;
    int threads = 0;
};

struct DesignResult {
    Regime regime = Regime::Fixed;
    int n = 1;
    double total_rate = 0.0;
    std::vector<SensitivityProfile> profiles;
    std::vector<PointDensity> lambdas;
    std::vector<VariableConstants> vc;
    std::vector<double> c;       // per-variable distortion constants
    std::vector<double> alpha;   // optimal fractional allocation at total_rate
    std::vector<double> rates;   // per-variable rates R_j
    double joint_entropy_bits = 0.0;

    /// Predicted distortion at total rate R for this regime (optimal alpha).
    double hr_distortion(double total_rate) const;
    /// Per-variable resolutions floor(K^alpha_j) at the resolution matching
    /// total rate R under this regime's high-resolution rate map.
    std::vector<int> resolutions_at(double total_rate) const;
    /// log2 of the total resolution K implied by rate R.
    double log2_resolution_at(double total_rate) const;
};

DesignResult design(const DesignProblem& problem);

}  // namespace dfsq
