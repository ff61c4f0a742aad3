#include "dfsq/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dfsq/quadrature.hpp"

namespace dfsq {

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::Fixed: return "fixed";
        case Regime::Variable: return "variable";
        case Regime::SlepianWolf: return "slepian-wolf";
    }
    return "?";
}

Regime regime_from_name(const std::string& name) {
    if (name == "fixed") return Regime::Fixed;
    if (name == "variable") return Regime::Variable;
    if (name == "slepian-wolf" || name == "sw") return Regime::SlepianWolf;
    throw ConfigError("unknown regime: " + name);
}

namespace {

// P{gamma(X) inside a dead zone}: mass of runs of at least 4 consecutive
// scan cells below the zero clamp. Isolated sub-clamp cells around point
// zeros (e.g. powers of x near 0) are not dead zones and stay admissible.
double clamped_mass_scan(const std::function<double(double)>& gamma,
                         const std::function<double(double)>& pdf) {
    constexpr int kCells = 4096;
    constexpr int kMinRun = 4;
    double mass = 0.0;
    int i = 0;
    while (i < kCells) {
        double x = (double(i) + 0.5) / kCells;
        if (gamma(x) >= kGammaClamp) {
            ++i;
            continue;
        }
        int start = i;
        double run_mass = 0.0;
        while (i < kCells) {
            double xm = (double(i) + 0.5) / kCells;
            if (gamma(xm) >= kGammaClamp) break;
            run_mass += pdf(xm) / kCells;
            ++i;
        }
        if (i - start >= kMinRun) mass += run_mass;
    }
    return mass;
}

void require_admissible(int j, double clamped_mass) {
    if (clamped_mass > kClampMassLimit)
        throw DontCareRequired(
            j, "sensitivity vanishes on probability " +
                   std::to_string(clamped_mass) +
                   " for variable " + std::to_string(j) +
                   "; use the don't-care design");
}

// Dead-zone mass of a tabulated profile: runs of >= 4 consecutive zero
// nodes, weighted by pdf.
double dead_mass_grid(const GridFunction& gamma,
                      const std::function<double(double)>& pdf) {
    constexpr std::size_t kMinRun = 4;
    double mass = 0.0;
    std::size_t i = 0;
    while (i < gamma.size()) {
        if (gamma.v[i] >= kGammaClamp) {
            ++i;
            continue;
        }
        std::size_t start = i;
        double run_mass = 0.0;
        while (i < gamma.size() && gamma.v[i] < kGammaClamp) {
            run_mass += pdf(gamma.node(i)) * gamma.step();
            ++i;
        }
        if (i - start >= kMinRun) mass += run_mass;
    }
    return mass;
}

}  // namespace

PointDensity fixed_rate_density(const std::function<double(double)>& gamma,
                                const Marginal& f) {
    require_admissible(-1, clamped_mass_scan(
                               gamma, [&f](double x) { return f.pdf(x); }));
    // Capture the marginal by value: the density may outlive the argument.
    auto pdf = [gamma, f](double x) {
        return std::cbrt(gamma(x) * gamma(x) * f.pdf(x));
    };
    return PointDensity::from_callable(pdf);
}

PointDensity fixed_rate_density(const SensitivityProfile& gamma,
                                const Marginal& f) {
    require_admissible(gamma.j, dead_mass_grid(gamma.gamma, [&f](double x) {
                           return f.pdf(x);
                       }));
    GridFunction lam = gamma.gamma;
    for (std::size_t i = 0; i < lam.size(); ++i) {
        double x = lam.node(i);
        lam.v[i] = std::cbrt(lam.v[i] * lam.v[i] * f.pdf(x));
    }
    return PointDensity::from_grid(std::move(lam));
}

PointDensity variable_rate_density(const std::function<double(double)>& gamma) {
    require_admissible(-1,
                       clamped_mass_scan(gamma, [](double) { return 1.0; }));
    return PointDensity::from_callable(gamma);
}

PointDensity variable_rate_density(const SensitivityProfile& gamma) {
    require_admissible(gamma.j,
                       dead_mass_grid(gamma.gamma, [](double) { return 1.0; }));
    return PointDensity::from_grid(gamma.gamma);
}

VariableConstants variable_constants(const std::function<double(double)>& gamma,
                                     const Marginal& f) {
    VariableConstants vc;
    double cbrt_int = integrate(
        [&](double x) {
            return std::cbrt(gamma(x) * gamma(x) * f.pdf(x));
        },
        0.0, 1.0, 1e-12);
    vc.quasinorm_13 = cbrt_int * cbrt_int * cbrt_int;
    vc.gamma_l1 = integrate(gamma, 0.0, 1.0, 1e-12);
    vc.e_log2_gamma = integrate(
        [&](double x) { return f.pdf(x) * log2_clamped(gamma(x)); }, 0.0, 1.0,
        1e-11);
    vc.h_bits = f.entropy_bits();
    vc.clamped_mass =
        clamped_mass_scan(gamma, [&f](double x) { return f.pdf(x); });
    return vc;
}

VariableConstants variable_constants(const SensitivityProfile& gamma,
                                     const Marginal& f) {
    const GridFunction& g = gamma.gamma;
    VariableConstants vc;
    GridFunction cbrt_g = g, elog = g;
    double mass = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double x = g.node(i);
        double fx = f.pdf(x);
        cbrt_g.v[i] = std::cbrt(g.v[i] * g.v[i] * fx);
        elog.v[i] = fx * log2_clamped(g.v[i]);
    }
    (void)mass;
    double c = cbrt_g.integral();
    vc.quasinorm_13 = c * c * c;
    vc.gamma_l1 = g.integral();
    vc.e_log2_gamma = elog.integral();
    vc.h_bits = f.entropy_bits();
    vc.clamped_mass = dead_mass_grid(g, [&f](double x) { return f.pdf(x); });
    return vc;
}

double distortion_constant(Regime regime, const VariableConstants& vc) {
    if (regime == Regime::Fixed) {
        if (!std::isfinite(vc.quasinorm_13))
            throw NumericError("divergent L^{1/3} quasinorm");
        return vc.quasinorm_13;
    }
    if (vc.clamped_mass > kClampMassLimit)
        throw DontCareRequired(-1, "E[log gamma] diverges; don't-care design "
                                   "required");
    // Entropy-matched constant: the gamma normalizer inside E[log lambda]
    // cancels E[(gamma/lambda)^2] at the optimal density, leaving
    // 2^{2h + 2E[log gamma]}. (Slepian-Wolf replaces the marginal entropy
    // with its joint-entropy share; handled by the caller.)
    double expo = 2.0 * vc.h_bits + 2.0 * vc.e_log2_gamma;
    if (regime == Regime::SlepianWolf) expo = 2.0 * vc.e_log2_gamma;
    return std::exp2(expo);
}

Allocation allocate(std::span<const double> c, double rate_per_variable,
                    bool clip_nonnegative) {
    std::size_t n = c.size();
    if (n == 0) throw DomainError("allocate needs at least one constant");
    for (double ci : c)
        if (!(ci > 0.0)) throw DomainError("allocate needs positive constants");

    Allocation out;
    out.rate.resize(n);
    double log_gm = 0.0;
    for (double ci : c) log_gm += std::log2(ci);
    log_gm /= double(n);
    for (std::size_t j = 0; j < n; ++j)
        out.rate[j] = rate_per_variable + 0.5 * (std::log2(c[j]) - log_gm);
    out.distortion =
        double(n) * std::exp2(log_gm) * std::exp2(-2.0 * rate_per_variable);
    for (double r : out.rate)
        if (r <= 0.0) out.has_nonpositive = true;

    if (clip_nonnegative && out.has_nonpositive) {
        // Active-set variant (not part of the high-resolution theory):
        // variables pinned at zero rate contribute c_j each; the budget is
        // re-split over the rest.
        std::vector<bool> active(n, true);
        double budget = rate_per_variable * double(n);
        for (int pass = 0; pass < int(n); ++pass) {
            std::size_t m = 0;
            double lg = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (active[j]) {
                    ++m;
                    lg += std::log2(c[j]);
                }
            if (m == 0) break;
            lg /= double(m);
            bool changed = false;
            for (std::size_t j = 0; j < n; ++j) {
                if (!active[j]) {
                    out.rate[j] = 0.0;
                    continue;
                }
                out.rate[j] =
                    budget / double(m) + 0.5 * (std::log2(c[j]) - lg);
                if (out.rate[j] <= 0.0) {
                    active[j] = false;
                    changed = true;
                }
            }
            if (!changed) break;
        }
        out.distortion = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            out.distortion += c[j] * std::exp2(-2.0 * std::max(0.0, out.rate[j]));
    }

    double total = std::accumulate(out.rate.begin(), out.rate.end(), 0.0);
    out.alpha.resize(n);
    for (std::size_t j = 0; j < n; ++j)
        out.alpha[j] = total > 0.0 ? out.rate[j] / total : 1.0 / double(n);
    return out;
}

// ---------------------------------------------------------------------------
// design()

DesignResult design(const DesignProblem& problem) {
    if (!problem.source || !problem.function)
        throw ConfigError("design needs a source and a function");
    const SourceModel& src = *problem.source;
    const FunctionModel& g = *problem.function;
    if (src.n() != g.n)
        throw ConfigError("source and function dimensions differ");

    DesignResult res;
    res.regime = problem.regime;
    res.n = src.n();
    res.total_rate = problem.total_rate;
    res.joint_entropy_bits = src.joint_entropy_bits();

    for (int j = 0; j < res.n; ++j) {
        auto closed = g.closed_gamma ? g.closed_gamma(j, src) : std::nullopt;
        res.profiles.push_back(sensitivity_profile(
            g, src, j, problem.grid_nodes, problem.mc_samples,
            problem.seed + std::uint64_t(j), problem.threads));
        const Marginal& f = src.marginal(j);
        if (closed) {
            res.vc.push_back(variable_constants(*closed, f));
            if (problem.regime == Regime::Fixed)
                res.lambdas.push_back(fixed_rate_density(*closed, f));
            else
                res.lambdas.push_back(variable_rate_density(*closed));
        } else {
            res.vc.push_back(variable_constants(res.profiles.back(), f));
            if (problem.regime == Regime::Fixed)
                res.lambdas.push_back(
                    fixed_rate_density(res.profiles.back(), f));
            else
                res.lambdas.push_back(
                    variable_rate_density(res.profiles.back()));
        }
        res.c.push_back(distortion_constant(problem.regime, res.vc.back()));
    }
    if (problem.regime == Regime::SlepianWolf) {
        // Fold the joint-entropy share into each constant so the standard
        // allocation applies.
        double share = std::exp2(2.0 * res.joint_entropy_bits / res.n);
        for (auto& cj : res.c) cj *= share;
    }
    auto alloc = allocate(res.c, problem.total_rate / res.n);
    res.alpha = alloc.alpha;
    res.rates = alloc.rate;
    return res;
}

double DesignResult::hr_distortion(double R) const {
    double log_gm = 0.0;
    for (double cj : c) log_gm += std::log2(cj);
    log_gm /= double(n);
    return double(n) / 12.0 * std::exp2(log_gm) * std::exp2(-2.0 * R / n);
}

double DesignResult::log2_resolution_at(double R) const {
    if (regime == Regime::Fixed) return R;
    double sum_elog_lambda = 0.0;
    for (int j = 0; j < n; ++j)
        sum_elog_lambda += vc[std::size_t(j)].e_log2_gamma -
                           std::log2(vc[std::size_t(j)].gamma_l1);
    if (regime == Regime::Variable) {
        double sum_h = 0.0;
        for (int j = 0; j < n; ++j) sum_h += vc[std::size_t(j)].h_bits;
        return R - sum_h - sum_elog_lambda;
    }
    return R - joint_entropy_bits - sum_elog_lambda;
}

std::vector<int> DesignResult::resolutions_at(double R) const {
    double log2K = log2_resolution_at(R);
    std::vector<int> out;
    out.reserve(std::size_t(n));
    for (int j = 0; j < n; ++j) {
        double kj = std::floor(std::exp2(log2K * alpha[std::size_t(j)]) *
                               (1.0 + 1e-12));
        out.push_back(std::max(1, int(kj)));
    }
    return out;
}

}  // namespace dfsq
