#pragma once

#include "stopvest/free_boundary.hpp"
#include "stopvest/model.hpp"
#include "stopvest/primal.hpp"
#include "stopvest/vi_solver.hpp"

#include <Eigen/Dense>

#include <random>

namespace fixtures {

inline stopvest::ProblemSpec scalar_spec(double r, double mu, double var, double gamma = 0.5, double K = 1.0,
                                         double T = 1.0) {
    stopvest::ProblemSpec s;
    s.market.r = r;
    s.market.mu = Eigen::VectorXd::Constant(1, mu);
    s.market.Sigma = Eigen::MatrixXd::Constant(1, 1, var);
    s.utility = {gamma, K};
    s.T = T;
    return s;
}

// r = 0.05, gamma = 0.5, K = 1, mu = 0.12, Sigma = 0.18, T = 1.
inline stopvest::ProblemSpec p0() { return scalar_spec(0.05, 0.12, 0.18); }

// Scalar market with a prescribed a^2 (Sigma = 1, mu = sqrt(a2)).
inline stopvest::ProblemSpec with_a2(double a2, double gamma = 0.5, double r = 0.05) {
    return scalar_spec(r, std::sqrt(a2), 1.0, gamma);
}

// P0 on the default grid, solved once per test binary.
inline const stopvest::DualSolution& p0_solution() {
    static const stopvest::DualSolution sol = [] {
        const auto spec = p0();
        const auto grid = stopvest::build_grid(stopvest::make_dual_domain(spec), 400, 400);
        return stopvest::solve_dual_vi(spec, grid, stopvest::SolverConfig{});
    }();
    return sol;
}

inline const stopvest::PolicySurface& p0_surface() {
    static const stopvest::PolicySurface surface = stopvest::PolicySurface::build(p0_solution());
    return surface;
}

inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = u(rng);
    Eigen::MatrixXd S = B.transpose() * B + 0.1 * Eigen::MatrixXd::Identity(n, n);
    return 0.5 * (S + S.transpose());
}

}  // namespace fixtures
