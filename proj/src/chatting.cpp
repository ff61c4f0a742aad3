#include "dfsq/chatting.hpp"

#include <cmath>

#include "dfsq/parallel.hpp"
#include "dfsq/quadrature.hpp"
#include "dfsq/rate.hpp"
#include "dfsq/rng.hpp"

namespace dfsq {

double ChatScenario::branch_prob(int y) const {
    double p1 = source->marginal(event.var).cdf(event.cut);
    return y == 1 ? p1 : 1.0 - p1;
}

ChatProfiles chat_profiles(const ChatScenario& sc) {
    if (!sc.source || !sc.function)
        throw ConfigError("chat scenario needs a source and a function");
    if (!sc.source->independent())
        throw ConfigError("chatting analysis assumes independent sources");
    ChatProfiles prof;
    prof.unconditional = sensitivity_profile(*sc.function, *sc.source, 0,
                                             sc.grid_nodes, sc.mc_samples,
                                             sc.seed);
    for (int y = 0; y < 2; ++y) {
        prof.branch[y] = conditional_sensitivity_profile(
            *sc.function, *sc.source, 0, sc.event, y, sc.grid_nodes,
            sc.mc_samples, sc.seed + 100 + std::uint64_t(y));
        prof.p[y] = sc.branch_prob(y);
        if (prof.p[y] <= 0.0)
            throw DomainError("zero-probability chat branch");
    }
    return prof;
}

ChatConstants fixed_rate_chat_constant(const ChatScenario& sc,
                                       const ChatProfiles& prof) {
    const Marginal& f1 = sc.source->marginal(0);
    ChatConstants out;
    out.without_chat =
        variable_constants(prof.unconditional, f1).quasinorm_13;
    for (int y = 0; y < 2; ++y)
        out.with_chat +=
            prof.p[y] * variable_constants(prof.branch[y], f1).quasinorm_13;
    if (!std::isfinite(out.with_chat))
        throw NumericError("divergent branch quasinorm");
    return out;
}

ChatConstants variable_rate_chat_constant(const ChatScenario& sc,
                                          const ChatProfiles& prof) {
    const Marginal& f1 = sc.source->marginal(0);
    ChatConstants out;
    auto vc_u = variable_constants(prof.unconditional, f1);
    out.without_chat = distortion_constant(Regime::Variable, vc_u);
    for (int y = 0; y < 2; ++y) {
        auto vc = variable_constants(prof.branch[y], f1);
        // X_1 is independent of Y, so h(X_1 | Y=y) = h(X_1).
        out.with_chat += prof.p[y] * distortion_constant(Regime::Variable, vc);
    }
    return out;
}

namespace {

// E[g(X_1, x2) | X_1 in (a,b]] for the uniform-conditional within the cell,
// weighted by the marginal of X_1. Exact for g piecewise linear in x_1 when
// the cell avoids the slope discontinuities (boundaries are pinned there).
double cell_mean(const FunctionModel& g, const Marginal& f1, double a,
                 double b, double x2) {
    double num = gauss_legendre8(
        [&](double x) {
            double pt[2] = {x, x2};
            return g.eval(std::span<const double>(pt, 2)) * f1.pdf(x);
        },
        a, b);
    double den = gauss_legendre8([&](double x) { return f1.pdf(x); }, a, b);
    if (den <= 0.0) {
        double mid[2] = {0.5 * (a + b), x2};
        return g.eval(std::span<const double>(mid, 2));
    }
    return num / den;
}

}  // namespace

ChatSimReport simulate_chat(const ChatScenario& sc, Regime regime,
                            double rate_per_variable, std::size_t samples,
                            std::uint64_t seed, int threads) {
    if (sc.function->n != 2 || sc.source->n() != 2)
        throw ConfigError("the chat simulator is bivariate");
    if (regime == Regime::SlepianWolf)
        throw ConfigError("chat simulation covers fixed and variable rates");
    auto prof = chat_profiles(sc);
    const Marginal& f1 = sc.source->marginal(0);
    SourceModel x1_only = SourceModel::product({f1});

    auto branch_density = [&](const SensitivityProfile& p) {
        if (regime == Regime::Fixed) return fixed_rate_density(p, f1);
        return variable_rate_density(p);
    };

    // Per-branch quantizers at the same per-variable rate; the sensitivity
    // jump at x_1 = cut gets a pinned boundary.
    CompandingQuantizer q_branch[2] = {CompandingQuantizer::uniform(1),
                                       CompandingQuantizer::uniform(1)};
    for (int y = 0; y < 2; ++y) {
        PointDensity lam = branch_density(prof.branch[y]);
        int K;
        if (regime == Regime::Fixed) {
            K = int(std::floor(std::exp2(rate_per_variable) + 1e-9));
        } else {
            std::vector<PointDensity> ls{lam};
            double alpha1[1] = {1.0};
            auto res = resolution_for_rate(Regime::Variable, ls, x1_only,
                                           std::span<const double>(alpha1, 1),
                                           rate_per_variable);
            K = res.per_variable[0];
        }
        q_branch[y] =
            CompandingQuantizer::build(Compander::build(lam), K, 1e-10);
        q_branch[y].pin_boundary(sc.event.cut);
    }

    CompandingQuantizer q_nochat = CompandingQuantizer::uniform(1);
    {
        PointDensity lam = branch_density(prof.unconditional);
        int K;
        if (regime == Regime::Fixed) {
            K = int(std::floor(std::exp2(rate_per_variable) + 1e-9));
        } else {
            std::vector<PointDensity> ls{lam};
            double alpha1[1] = {1.0};
            auto res = resolution_for_rate(Regime::Variable, ls, x1_only,
                                           std::span<const double>(alpha1, 1),
                                           rate_per_variable);
            K = res.per_variable[0];
        }
        q_nochat = CompandingQuantizer::build(Compander::build(lam), K, 1e-10);
        q_nochat.pin_boundary(sc.event.cut);
    }

    const FunctionModel& g = *sc.function;
    std::size_t batch = SourceModel::kBatch;
    int n_batches = int((samples + batch - 1) / batch);
    std::vector<double> bm_chat(std::size_t(n_batches), 0.0);
    std::vector<double> bm_nochat(std::size_t(n_batches), 0.0);

    parallel_batches(
        n_batches,
        [&](int b) {
            BatchRng rng(seed, std::uint64_t(b));
            std::size_t begin = std::size_t(b) * batch;
            std::size_t end = std::min(samples, begin + batch);
            double sum_chat = 0.0, sum_nochat = 0.0;
            for (std::size_t s = begin; s < end; ++s) {
                double x1 = sc.source->marginal(0).inv_cdf(rng.uniform());
                double x2 = sc.source->marginal(1).inv_cdf(rng.uniform());
                int y = x2 <= sc.event.cut ? 1 : 0;
                double pt[2] = {x1, x2};
                double gx = g.eval(std::span<const double>(pt, 2));

                const auto& qc = q_branch[y];
                int cell = qc.quantize(x1);
                double ghat = cell_mean(
                    g, f1, qc.boundaries()[std::size_t(cell)],
                    qc.boundaries()[std::size_t(cell) + 1], x2);
                sum_chat += (gx - ghat) * (gx - ghat);

                int cell0 = q_nochat.quantize(x1);
                double ghat0 = cell_mean(
                    g, f1, q_nochat.boundaries()[std::size_t(cell0)],
                    q_nochat.boundaries()[std::size_t(cell0) + 1], x2);
                sum_nochat += (gx - ghat0) * (gx - ghat0);
            }
            bm_chat[std::size_t(b)] = sum_chat / double(end - begin);
            bm_nochat[std::size_t(b)] = sum_nochat / double(end - begin);
        },
        threads);

    auto reduce = [&](const std::vector<double>& bm, double& mean, double& se) {
        mean = 0.0;
        for (double v : bm) mean += v;
        mean /= double(n_batches);
        double var = 0.0;
        for (double v : bm) var += (v - mean) * (v - mean);
        se = n_batches > 1
                 ? std::sqrt(var / n_batches / (n_batches - 1))
                 : 0.0;
    };

    ChatSimReport rep;
    rep.regime = regime;
    rep.rate_per_variable = rate_per_variable;
    reduce(bm_chat, rep.D1_chat, rep.se_chat);
    reduce(bm_nochat, rep.D1_nochat, rep.se_nochat);
    rep.ratio = rep.D1_nochat / rep.D1_chat;
    rep.chat_link_bits = 1.0;
    rep.charged_rate = rate_per_variable + 1.0;
    return rep;
}

}  // namespace dfsq
