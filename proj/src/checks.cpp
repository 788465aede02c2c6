#include "stopvest/checks.hpp"

#include "stopvest/dual_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stopvest {

namespace {

TheoremCheck make_check(const char* name, double margin, double tolerance, std::ptrdiff_t index) {
    TheoremCheck c{name, false, margin, tolerance, index};
    c.passed = margin <= tolerance;
    return c;
}

}  // namespace

TheoremCheck check_dual_bounds(const DualSolution& sol, double tolerance) {
    const double A = sol.constants.A;
    const double T = sol.spec.T;
    double worst = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t where = -1;
    for (std::size_t k = 0; k < sol.rows(); ++k) {
        const auto u = sol.row(k);
        const double grow = std::exp(A * (T - sol.grid.t[k]));
        for (std::size_t j = 0; j < u.size(); ++j) {
            const double lo = sol.phi[j];
            const double hi = grow * sol.phi[j];
            const double v = std::max((lo - u[j]) / std::abs(lo), (u[j] - hi) / std::abs(hi));
            if (v > worst) {
                worst = v;
                where = static_cast<std::ptrdiff_t>(k);
            }
        }
    }
    return make_check("dual_bounds", worst, tolerance, where);
}

TheoremCheck check_time_monotonicity(const DualSolution& sol, double tolerance) {
    double worst = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t where = -1;
    for (std::size_t k = 0; k + 1 < sol.rows(); ++k) {
        const auto u = sol.row(k);
        const auto un = sol.row(k + 1);
        for (std::size_t j = 0; j < u.size(); ++j) {
            const double v = un[j] - u[j];
            if (v > worst) {
                worst = v;
                where = static_cast<std::ptrdiff_t>(k);
            }
        }
    }
    return make_check("time_monotonicity", worst, tolerance, where);
}

TheoremCheck check_gap_monotonicity(const DualSolution& sol, double tolerance) {
    double worst = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t where = -1;
    for (std::size_t k = 0; k < sol.rows(); ++k) {
        const auto u = sol.row(k);
        for (std::size_t j = 0; j + 1 < u.size(); ++j) {
            const double v = (u[j + 1] - sol.phi[j + 1]) - (u[j] - sol.phi[j]);
            if (v > worst) {
                worst = v;
                where = static_cast<std::ptrdiff_t>(k);
            }
        }
    }
    return make_check("gap_monotonicity", worst, tolerance, where);
}

TheoremCheck check_convexity(const DualSolution& sol) {
    const auto& y = sol.grid.y;
    double least = std::numeric_limits<double>::infinity();
    std::ptrdiff_t where = -1;
    for (std::size_t k = 0; k < sol.rows(); ++k) {
        const auto u = sol.row(k);
        for (std::size_t j = 2; j + 1 < u.size(); ++j) {
            const double hl = y[j] - y[j - 1], hr = y[j + 1] - y[j];
            const double d2 = 2.0 * ((u[j + 1] - u[j]) / hr - (u[j] - u[j - 1]) / hl) / (hl + hr);
            if (d2 < least) {
                least = d2;
                where = static_cast<std::ptrdiff_t>(k);
            }
        }
    }
    TheoremCheck c{"convexity", least > 0.0, -least, 0.0, where};
    return c;
}

TheoremCheck check_g_terminal_limit(const FreeBoundaryCurve& curve, const ProblemSpec& spec, const DualGrid& grid) {
    const double hT = hT_closed_form(spec);
    const double gT = gT_closed_form(spec);
    const double cells = 2.0 * local_cell_width(grid, hT);
    const double y0 = grid.y.back();
    const double g_lo = map_to_g(std::min(hT + cells, y0), spec);
    const double g_hi = map_to_g(std::max(hT - cells, grid.y.front()), spec);
    const double tol = std::max(gT - g_lo, g_hi - gT);
    const std::size_t n = curve.g.size();
    if (n == 0) return TheoremCheck{"g_terminal_limit", false, std::numeric_limits<double>::infinity(), tol, -1};
    return make_check("g_terminal_limit", std::abs(curve.g[n - 1] - gT), tol, static_cast<std::ptrdiff_t>(n - 1));
}

TheoremCheck check_dual_constraint(const ConstraintCertificate& cert) {
    double margin = std::max(-cert.min_residual, cert.max_abs_contact_residual);
    if (cert.undefined_nodes > 0) margin = std::numeric_limits<double>::infinity();
    return make_check("dual_constraint", margin, cert.tolerance, static_cast<std::ptrdiff_t>(cert.residual_time));
}

TheoremCheck check_marginal_utility_gap(const ConstraintCertificate& cert) {
    const double margin = std::max(-cert.min_gap, cert.max_abs_contact_gap);
    return make_check("marginal_utility_gap", margin, cert.tolerance, static_cast<std::ptrdiff_t>(cert.gap_time));
}

TheoremCheck check_pde_residual(const ResidualReport& report, double tolerance) {
    std::ptrdiff_t where = -1;
    for (std::size_t k = 0; k < report.steps.size(); ++k)
        if (report.steps[k].pde == report.max_pde) where = static_cast<std::ptrdiff_t>(k);
    return make_check("pde_residual", report.max_pde, tolerance, where);
}

TheoremCheck check_legendre_round_trip(const DualSolution& sol, const PolicySurface& surface, double tolerance) {
    const std::size_t N = sol.grid.N();
    const std::size_t M = sol.grid.M();
    std::vector<double> worst(N, 0.0);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t kk = 0; kk < static_cast<std::ptrdiff_t>(N); ++kk) {
        const auto k = static_cast<std::size_t>(kk);
        const auto& s = surface.slices()[k];
        const auto u = sol.row(k);
        double w = 0.0;
        for (std::size_t j = 1; j < M; ++j) {
            const double v = legendre_transform(s.x, s.V, sol.grid.y[j]);
            w = std::max(w, std::abs(v - u[j]) / std::abs(u[j]));
        }
        worst[k] = w;
    }
    const auto it = std::max_element(worst.begin(), worst.end());
    if (it == worst.end()) return make_check("legendre_round_trip", 0.0, tolerance, -1);
    return make_check("legendre_round_trip", *it, tolerance, std::distance(worst.begin(), it));
}

std::vector<TheoremCheck> all_solution_checks(const DualSolution& sol, const FreeBoundaryCurve& curve,
                                              const PolicySurface& surface) {
    std::vector<TheoremCheck> out;
    out.push_back(check_dual_bounds(sol));
    out.push_back(check_time_monotonicity(sol));
    out.push_back(check_gap_monotonicity(sol));
    out.push_back(check_convexity(sol));
    for (auto& c : verify_theorems(curve, sol.spec, sol.grid)) out.push_back(std::move(c));
    out.push_back(check_g_terminal_limit(curve, sol.spec, sol.grid));
    const auto cert = verify_constraints(sol);
    out.push_back(check_dual_constraint(cert));
    out.push_back(check_marginal_utility_gap(cert));
    out.push_back(check_pde_residual(residual_report(sol)));
    out.push_back(check_legendre_round_trip(sol, surface));
    return out;
}

}  // namespace stopvest
