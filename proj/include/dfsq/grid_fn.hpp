#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "dfsq/common.hpp"

namespace dfsq {

/// Function tabulated on a uniform grid over [lo, hi] with linear
/// interpolation between nodes. Integrals are exact for the interpolant.
struct GridFunction {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> v;

    std::size_t size() const { return v.size(); }
    double step() const { return (hi - lo) / double(v.size() - 1); }
    double node(std::size_t i) const { return lo + double(i) * step(); }

    double operator()(double x) const {
        if (x <= lo) return v.front();
        if (x >= hi) return v.back();
        double t = (x - lo) / step();
        auto i = static_cast<std::size_t>(t);
        if (i >= v.size() - 1) i = v.size() - 2;
        double f = t - double(i);
        return v[i] + f * (v[i + 1] - v[i]);
    }

    static GridFunction tabulate(const std::function<double(double)>& f,
                                 std::size_t n_nodes, double lo = 0.0,
                                 double hi = 1.0) {
        if (n_nodes < 2) throw DomainError("GridFunction needs >= 2 nodes");
        GridFunction g;
        g.lo = lo;
        g.hi = hi;
        g.v.resize(n_nodes);
        double h = (hi - lo) / double(n_nodes - 1);
        for (std::size_t i = 0; i < n_nodes; ++i) g.v[i] = f(lo + double(i) * h);
        return g;
    }

    // Trapezoid sum: the exact integral of the piecewise-linear interpolant.
    double integral() const {
        double h = step();
        double s = 0.5 * (v.front() + v.back());
        for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i];
        return s * h;
    }

    GridFunction& scale(double c) {
        for (auto& x : v) x *= c;
        return *this;
    }
};

}  // namespace dfsq
