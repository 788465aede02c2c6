#pragma once

#include "stopvest/free_boundary.hpp"
#include "stopvest/vi_solver.hpp"

#include <Eigen/Dense>

#include <vector>

namespace stopvest {

/// First and second y-derivatives of one dual row.
struct DualDerivatives {
    std::vector<double> du_dy;
    std::vector<double> d2u_dy2;
};

/// Derivatives of row k. The gap u - phi is differenced in z (central in the
/// interior, second-order one-sided at the grid ends and on contact nodes,
/// where the stencil stays inside the contact set) and the exact obstacle
/// derivatives are added back.
DualDerivatives dual_derivatives(const DualSolution& sol, std::size_t k);

struct PrimalSlice {
    double t = 0.0;
    std::vector<double> x;  // increasing
    std::vector<double> V;
    std::vector<double> y;  // originating dual node
    std::vector<double> du_dy;
    std::vector<double> d2u_dy2;
    std::vector<double> pi_scale;  // pi = kelly * pi_scale
    std::vector<std::uint8_t> in_exercise;
};

/// Inverse transform of row k: x = -u_y, V = u - y u_y, pi = kelly y u_yy.
/// Throws Error(Reconstruction) when x is not strictly decreasing in y.
PrimalSlice reconstruct_slice(const DualSolution& sol, std::size_t k);

/// pi* = kelly * y * u_yy. Throws Error(Domain) when u_yy <= 0.
Eigen::VectorXd optimal_portfolio(double y, double d2u_dy2, const DerivedConstants& constants);

struct ConstraintCertificate {
    double min_residual = 0.0;
    double min_gap = 0.0;
    std::size_t residual_time = 0, residual_node = 0;
    std::size_t gap_time = 0, gap_node = 0;
    double max_abs_contact_residual = 0.0;
    double max_abs_contact_gap = 0.0;
    std::size_t undefined_nodes = 0;  // u_y >= K
    double tolerance = 1e-6;
    bool passed = false;
};

/// Dual-constraint residual and obstacle-derivative gap at every node of row k.
ConstraintCertificate verify_constraint(const DualSolution& sol, std::size_t k, double tolerance = 1e-6);
/// Same, aggregated over every non-terminal row.
ConstraintCertificate verify_constraints(const DualSolution& sol, double tolerance = 1e-6);

/// Reconstructed primal value and policy over the whole time grid.
class PolicySurface {
public:
    /// `boundary` may be empty (no stopping region, e.g. the never-stop regime).
    PolicySurface(const DualSolution& sol, std::vector<PrimalSlice> slices, FreeBoundaryCurve boundary);

    /// Reconstructs every slice (OpenMP over time rows).
    static PolicySurface build(const DualSolution& sol);
    /// Serial reference of build().
    static PolicySurface build_serial(const DualSolution& sol);

    double value_at(double x, double t) const;
    Eigen::VectorXd pi_at(double x, double t) const;
    /// Scalar multiplier s with pi = kelly * s.
    double pi_scale_at(double x, double t) const;
    bool stop_at(double x, double t) const;
    /// Interpolated stopping boundary; -infinity where there is none.
    double g_at(double t) const;

    /// Time-dependent part of a policy lookup, shared by every path at t.
    struct TimePoint {
        std::size_t k;  // bracketing slices k, k+1
        double w;       // weight of slice k+1
        double g;       // stopping boundary, -infinity if none
        double x_cap;   // largest wealth covered by both slices
    };
    TimePoint time_point(double t) const;

    /// pi_scale_at for a prepared time point, with per-path search hints into
    /// the two slices. Wealth above x_cap is clamped to it.
    double pi_scale_at(double x, const TimePoint& at, std::size_t& hint_lo, std::size_t& hint_hi) const;

    /// Largest wealth covered at time t.
    double x_max(double t) const;

    const std::vector<PrimalSlice>& slices() const { return slices_; }
    const FreeBoundaryCurve& boundary() const { return boundary_; }
    const ProblemSpec& spec() const { return spec_; }
    const DerivedConstants& constants() const { return constants_; }
    const std::vector<double>& times() const { return times_; }

    /// Bracketing slice k with t_k <= t <= t_{k+1} and the weight of t_{k+1}.
    std::pair<std::size_t, double> bracket(double t) const;

    /// Interpolates field (V or pi_scale) at x in slice k. `hint` is a search
    /// start index that is updated in place.
    double interpolate(std::size_t k, double x, const std::vector<double> PrimalSlice::*field, std::size_t& hint) const;

private:
    ProblemSpec spec_;
    DerivedConstants constants_;
    std::vector<double> times_;
    std::vector<PrimalSlice> slices_;
    FreeBoundaryCurve boundary_;
};

}  // namespace stopvest
