#include "stopvest/free_boundary.hpp"

#include "stopvest/error.hpp"

#include <algorithm>
#include <cmath>

namespace stopvest {

BoundaryPoint extract_h_row(const DualSolution& sol, std::size_t k) {
    const auto contact = sol.contact_row(k);
    const auto u = sol.row(k);
    const auto& y = sol.grid.y;
    const std::size_t n = contact.size();

    std::size_t first = n;
    for (std::size_t j = 0; j < n; ++j) {
        if (contact[j]) {
            first = j;
            break;
        }
    }
    if (first == n) throw Error(ErrorKind::Numeric, "no exercise region at t = " + std::to_string(sol.grid.t[k]));
    for (std::size_t j = first; j < n; ++j)
        if (!contact[j]) throw Error(ErrorKind::Numeric, "contact set not connected at t = " + std::to_string(sol.grid.t[k]));

    BoundaryPoint p;
    p.first_contact = first;
    if (first == 0) {
        p.h = y[0];
        p.degenerate = true;
        return p;
    }
    p.h = y[first];
    if (first < 2) return p;

    const double s1 = std::sqrt(std::max(0.0, u[first - 1] - sol.phi[first - 1]));
    const double s2 = std::sqrt(std::max(0.0, u[first - 2] - sol.phi[first - 2]));
    const double slope = (s1 - s2) / (y[first - 1] - y[first - 2]);
    if (slope < 0.0) p.h = std::clamp(y[first - 1] - s1 / slope, y[first - 1], y[first]);
    return p;
}

FreeBoundaryCurve extract_h(const DualSolution& sol) {
    const std::size_t N = sol.grid.N();
    FreeBoundaryCurve c;
    c.t.assign(sol.grid.t.begin(), sol.grid.t.begin() + static_cast<std::ptrdiff_t>(N));
    c.h.resize(N);
    c.first_contact.resize(N);
    for (std::size_t k = 0; k < N; ++k) {
        const auto p = extract_h_row(sol, k);
        c.h[k] = p.h;
        c.first_contact[k] = p.first_contact;
    }
    c.g = map_to_g(c.h, sol.spec);
    return c;
}

namespace {

double limit_ratio(const ProblemSpec& spec) {
    const auto c = derived_constants(spec);
    const double g = spec.utility.gamma;
    const double r = spec.market.r;
    const double denom = c.a2 / (2.0 * (1.0 - g)) - r * (1.0 - g) / g;
    if (!(denom > 0.0)) throw Error(ErrorKind::Config, "regime violation: terminal boundary limit undefined");
    return r * spec.utility.K / denom;
}

}  // namespace

double hT_closed_form(const ProblemSpec& spec) {
    return std::pow(limit_ratio(spec), spec.utility.gamma - 1.0);
}

double gT_closed_form(const ProblemSpec& spec) { return limit_ratio(spec) - spec.utility.K; }

double map_to_g(double h, const ProblemSpec& spec) {
    const double y0 = std::pow(spec.utility.K, spec.utility.gamma - 1.0);
    if (!(h > 0.0) || h > y0 * (1.0 + 1e-12)) throw Error(ErrorKind::Domain, "inconsistent input: h outside (0, y0]");
    return std::max(0.0, std::pow(h, 1.0 / (spec.utility.gamma - 1.0)) - spec.utility.K);
}

std::vector<double> map_to_g(const std::vector<double>& h, const ProblemSpec& spec) {
    std::vector<double> g(h.size());
    std::transform(h.begin(), h.end(), g.begin(), [&](double v) { return map_to_g(v, spec); });
    return g;
}

double map_to_h(double g, const ProblemSpec& spec) {
    if (!(g >= 0.0)) throw Error(ErrorKind::Domain, "g must be nonnegative");
    return std::pow(g + spec.utility.K, spec.utility.gamma - 1.0);
}

double local_cell_width(const DualGrid& grid, double y) {
    const auto& ys = grid.y;
    auto it = std::upper_bound(ys.begin(), ys.end(), y);
    std::size_t j = static_cast<std::size_t>(std::distance(ys.begin(), it));
    j = std::clamp<std::size_t>(j, 1, ys.size() - 1);
    return ys[j] - ys[j - 1];
}

std::vector<TheoremCheck> verify_theorems(const FreeBoundaryCurve& curve, const ProblemSpec& spec,
                                          const DualGrid& grid) {
    std::vector<TheoremCheck> out;
    const std::size_t n = curve.h.size();
    const double hT = hT_closed_form(spec);

    // Margins are measured in cells of the local y spacing.
    TheoremCheck a{"h_nonincreasing", true, -1e300, 1.0, -1};
    TheoremCheck b{"g_nondecreasing", true, -1e300, 1.0, -1};
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double cell = local_cell_width(grid, curve.h[k]);
        const double va = (curve.h[k + 1] - curve.h[k]) / cell;
        if (va > a.margin) {
            a.margin = va;
            a.index = static_cast<std::ptrdiff_t>(k + 1);
        }
        const double h_lo = std::max(curve.h[k] - cell, grid.y.front());
        const double gcell = std::abs(map_to_g(h_lo, spec) - curve.g[k]);
        const double vb = (curve.g[k] - curve.g[k + 1]) / gcell;
        if (vb > b.margin) {
            b.margin = vb;
            b.index = static_cast<std::ptrdiff_t>(k + 1);
        }
    }
    if (n < 2) a.margin = b.margin = 0.0;
    a.passed = a.margin <= a.tolerance;
    b.passed = b.margin <= b.tolerance;
    out.push_back(a);
    out.push_back(b);

    TheoremCheck c{"h_terminal_limit", false, 0.0, 2.0, static_cast<std::ptrdiff_t>(n) - 1};
    if (n > 0) {
        c.margin = std::abs(curve.h[n - 1] - hT) / local_cell_width(grid, hT);
        c.passed = c.margin <= c.tolerance;
    }
    out.push_back(c);

    TheoremCheck d{"h_lower_bound", true, -1e300, 1.0, -1};
    for (std::size_t k = 0; k < n; ++k) {
        const double v = (hT - curve.h[k]) / local_cell_width(grid, hT);
        if (v > d.margin) {
            d.margin = v;
            d.index = static_cast<std::ptrdiff_t>(k);
        }
    }
    if (n == 0) d.margin = 0.0;
    d.passed = d.margin <= d.tolerance;
    out.push_back(d);
    return out;
}

}  // namespace stopvest
