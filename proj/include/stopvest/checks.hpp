#pragma once

#include "stopvest/free_boundary.hpp"
#include "stopvest/primal.hpp"
#include "stopvest/vi_solver.hpp"

#include <vector>

namespace stopvest {

/// phi <= u <= exp(A (T - t)) phi nodewise; margin is the worst relative
/// excess over either bound.
TheoremCheck check_dual_bounds(const DualSolution& sol, double tolerance = 1e-6);

/// u(y, t_k) - u(y, t_{k+1}) >= 0; margin is the largest increase in t.
TheoremCheck check_time_monotonicity(const DualSolution& sol, double tolerance = 1e-9);

/// u - phi nonincreasing in y; margin is the largest increase between nodes.
TheoremCheck check_gap_monotonicity(const DualSolution& sol, double tolerance = 1e-9);

/// Three-point second differences of u in y on nodes at least two cells from
/// the left boundary. Margin is -min(u_yy); passes when u_yy > 0 everywhere.
TheoremCheck check_convexity(const DualSolution& sol);

/// |g(t_{N-1}) - gT| against the image under map_to_g of the two-cell h tolerance.
TheoremCheck check_g_terminal_limit(const FreeBoundaryCurve& curve, const ProblemSpec& spec, const DualGrid& grid);

/// Dual-constraint residual >= -tol everywhere and |residual| <= tol on contact nodes.
TheoremCheck check_dual_constraint(const ConstraintCertificate& cert);
/// Marginal-utility gap >= -tol everywhere and |gap| <= tol on contact nodes.
TheoremCheck check_marginal_utility_gap(const ConstraintCertificate& cert);

/// Worst scaled PDE residual on continuation nodes.
TheoremCheck check_pde_residual(const ResidualReport& report, double tolerance = 1e-6);

/// Brute-force Legendre transform of every non-terminal reconstructed slice
/// against u on interior dual nodes; margin is the worst relative error.
TheoremCheck check_legendre_round_trip(const DualSolution& sol, const PolicySurface& surface,
                                       double tolerance = 1e-3);

/// Every check of a free-boundary solve, in report order.
std::vector<TheoremCheck> all_solution_checks(const DualSolution& sol, const FreeBoundaryCurve& curve,
                                              const PolicySurface& surface);

}  // namespace stopvest
