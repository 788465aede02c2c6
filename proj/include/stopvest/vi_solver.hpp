#pragma once

#include "stopvest/dual_space.hpp"
#include "stopvest/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace stopvest {

/// Uniform grid in z = ln y on [ln y_min, ln y0] and uniform in t on [0, T].
struct DualGrid {
    std::vector<double> z;
    std::vector<double> y;  // exp(z), with y.back() == y0 exactly
    std::vector<double> t;
    double dz = 0.0;
    double dt = 0.0;

    std::size_t M() const { return z.size() - 1; }
    std::size_t N() const { return t.size() - 1; }

    /// No size floor; build_grid is the production entry point.
    static DualGrid uniform(double y_min, double y0, std::size_t M, double T, std::size_t N);
};

/// Production grid: M, N >= 50.
DualGrid build_grid(const DualDomain& domain, std::size_t M, std::size_t N);

struct SolverConfig {
    double theta = 0.5;
    int rannacher_steps = 4;
    double psor_omega = 1.5;
    double psor_tol = 1e-9;
    int psor_max_iter = 10000;
    double contact_tol = 1e-8;

    /// contact_tol = max(1e-8, 10 psor_tol).
    static SolverConfig defaults_for(double psor_tol);
    void validate() const;
};

/// Tridiagonal rows of L u = -(a^2/2)(u_zz - u_z) + r u. Entries at the two
/// boundary rows are unused (Dirichlet).
struct DiscreteOperator {
    std::vector<double> sub, diag, sup;
    bool upwinded = false;

    std::size_t size() const { return diag.size(); }
    /// (L u)_j on interior rows; 0 on the boundary rows.
    void apply(std::span<const double> u, std::span<double> out) const;
};

DiscreteOperator assemble_operator(const DualGrid& grid, const DerivedConstants& constants, double r);

/// Thomas elimination. Throws Error(Numeric) on a vanishing pivot.
void solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                       std::span<const double> sup, std::span<const double> rhs,
                       std::span<double> out);

/// One backward theta step of -u_t + L u = 0 with Dirichlet data at both ends.
std::vector<double> step_linear(std::span<const double> u_next, const DiscreteOperator& op, double dt,
                                double theta, double boundary_left, double boundary_right);

struct ProjectedStep {
    std::vector<double> u;
    int iterations = 0;
    double last_change = 0.0;
};

/// One backward theta step of the obstacle problem, solved by projected SOR.
/// The boundary entries of phi_row are ignored; -infinity disables the
/// obstacle at a node.
ProjectedStep step_projected(std::span<const double> u_next, const DiscreteOperator& op, double dt,
                             double theta, std::span<const double> phi_row, double boundary_left,
                             double boundary_right, const SolverConfig& config);

/// Same discrete complementarity problem solved by a penalty iteration on the
/// active set. Cross-check for the projected solver.
std::vector<double> step_penalty(std::span<const double> u_next, const DiscreteOperator& op, double dt,
                                 double theta, std::span<const double> phi_row, double boundary_left,
                                 double boundary_right, double penalty);

/// Dirichlet and terminal data of a backward solve.
struct BoundaryData {
    std::function<double(double y)> terminal;
    std::function<double(double t)> left;
    std::function<double(double t)> right;
};

/// Terminal phi, right boundary K^gamma/gamma, and the Merton dual closure at y_min.
BoundaryData default_boundary_data(const ProblemSpec& spec, const DualGrid& grid);

/// v_M(y, t) = ((1-gamma)/gamma) exp((A - r)(T - t)) y^(gamma/(gamma-1)).
double merton_dual(double y, double t, const ProblemSpec& spec, const DerivedConstants& constants);

struct DualSolution {
    ProblemSpec spec;
    DerivedConstants constants;
    DualGrid grid;
    SolverConfig config;
    std::vector<double> u;            // (N+1) x (M+1), row k is time t_k
    std::vector<std::uint8_t> contact;  // u - phi <= contact_tol
    std::vector<double> phi;          // obstacle on the y grid
    std::vector<int> psor_iterations;  // per time step, 0 for linear steps
    std::vector<double> step_theta;    // theta used for the step from row k+1 to row k
    bool obstacle = true;

    std::size_t cols() const { return grid.M() + 1; }
    std::size_t rows() const { return grid.N() + 1; }
    std::span<const double> row(std::size_t k) const { return {u.data() + k * cols(), cols()}; }
    std::span<const std::uint8_t> contact_row(std::size_t k) const {
        return {contact.data() + k * cols(), cols()};
    }
    double at(std::size_t k, std::size_t j) const { return u[k * cols() + j]; }
};

/// Obstacle problem; requires the free-boundary regime.
DualSolution solve_dual_vi(const ProblemSpec& spec, const DualGrid& grid, const SolverConfig& config);

/// Obstacle-free linear problem; used for the never-stop regime. When
/// `override_data` is set the regime gate is skipped (oracle mode).
DualSolution solve_dual_linear(const ProblemSpec& spec, const DualGrid& grid, const SolverConfig& config,
                               const BoundaryData* override_data = nullptr);

struct StepResidual {
    double complementarity = 0.0;  // max |min(A u - b, u - phi)|
    double pde = 0.0;              // max |A u - b| / (dt max|u|) on continuation nodes
    double obstacle_violation = 0.0;  // max (phi - u)^+
};

struct ResidualReport {
    std::vector<StepResidual> steps;  // one per time row; the terminal row has only obstacle data
    double max_complementarity = 0.0;
    double max_pde = 0.0;
    double max_obstacle_violation = 0.0;
};

ResidualReport residual_report(const DualSolution& sol);

}  // namespace stopvest
