// Serial reference against the OpenMP kernels on the reference instance.

#include "stopvest/dual_space.hpp"
#include "stopvest/montecarlo.hpp"
#include "stopvest/primal.hpp"
#include "stopvest/vi_solver.hpp"

#include <omp.h>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

using namespace stopvest;

namespace {

double best_seconds(int reps, const std::function<void()>& f) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void row(const char* name, double serial, double parallel) {
    std::printf("%-16s %10.4f %10.4f %8.2fx\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
    const std::size_t n_paths = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20000;
    ProblemSpec spec;
    spec.market.r = 0.05;
    spec.market.mu = Eigen::VectorXd::Constant(1, 0.12);
    spec.market.Sigma = Eigen::MatrixXd::Constant(1, 1, 0.18);
    spec.utility = {0.5, 1.0};
    spec.T = 1.0;

    const auto t_solve = std::chrono::steady_clock::now();
    const auto sol = solve_dual_vi(spec, build_grid(make_dual_domain(spec), 400, 400), SolverConfig{});
    const double solve_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_solve).count();
    std::printf("threads %d, dual solve %.3f s, %zu paths\n", omp_get_max_threads(), solve_s, n_paths);
    std::printf("%-16s %10s %10s %9s\n", "kernel", "serial s", "openmp s", "speedup");

    const int reps = 3;
    row("reconstruct", best_seconds(reps, [&] { (void)PolicySurface::build_serial(sol); }),
        best_seconds(reps, [&] { (void)PolicySurface::build(sol); }));

    row("certificate",
        best_seconds(reps, [&] {
            for (std::size_t k = 0; k < sol.grid.N(); ++k) (void)verify_constraint(sol, k);
        }),
        best_seconds(reps, [&] { (void)verify_constraints(sol); }));

    const auto surface = PolicySurface::build(sol);
    const SurfacePolicy policy(surface);
    MCConfig cfg;
    cfg.n_paths = n_paths;
    MCEstimate a, b;
    row("monte carlo", best_seconds(reps, [&] { a = simulate_fixed_policy_serial(policy, 2.0, 0.0, spec, cfg); }),
        best_seconds(reps, [&] { b = simulate_fixed_policy(policy, 2.0, 0.0, spec, cfg); }));
    std::printf("estimates %s (%.17g)\n", a.mean == b.mean && a.std_err == b.std_err ? "identical" : "DIFFER",
                a.mean);
    return a.mean == b.mean ? 0 : 1;
}
