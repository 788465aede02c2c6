#include "stopvest/vi_solver.hpp"

#include "stopvest/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace stopvest {

DualGrid DualGrid::uniform(double y_min, double y0, std::size_t M, double T, std::size_t N) {
    if (M < 2 || N < 1) throw Error(ErrorKind::Config, "grid needs M >= 2 and N >= 1");
    if (!(y_min > 0.0 && y_min < y0)) throw Error(ErrorKind::Config, "grid needs 0 < y_min < y0");
    if (!(T > 0.0)) throw Error(ErrorKind::Config, "grid needs T > 0");

    DualGrid g;
    const double z_lo = std::log(y_min);
    const double z_hi = std::log(y0);
    g.dz = (z_hi - z_lo) / static_cast<double>(M);
    g.dt = T / static_cast<double>(N);
    g.z.resize(M + 1);
    g.y.resize(M + 1);
    for (std::size_t j = 0; j <= M; ++j) {
        // Fill from the right so that z_M = ln y0 exactly.
        g.z[j] = z_hi - static_cast<double>(M - j) * g.dz;
        g.y[j] = std::exp(g.z[j]);
    }
    g.z[0] = z_lo;
    g.y[0] = y_min;
    g.y[M] = y0;
    g.t.resize(N + 1);
    for (std::size_t k = 0; k <= N; ++k) g.t[k] = static_cast<double>(k) * g.dt;
    g.t[N] = T;
    return g;
}

DualGrid build_grid(const DualDomain& domain, std::size_t M, std::size_t N) {
    if (M < 50 || N < 50) throw Error(ErrorKind::Config, "config error: M and N must be at least 50");
    if (!(domain.y_min > 0.0 && domain.y_min <= domain.y0 / 10.0))
        throw Error(ErrorKind::Config, "config error: need 0 < y_min <= y0/10");
    return DualGrid::uniform(domain.y_min, domain.y0, M, domain.T, N);
}

SolverConfig SolverConfig::defaults_for(double psor_tol) {
    SolverConfig c;
    c.psor_tol = psor_tol;
    c.contact_tol = std::max(1e-8, 10.0 * psor_tol);
    return c;
}

void SolverConfig::validate() const {
    if (!(theta >= 0.5 && theta <= 1.0)) throw Error(ErrorKind::Config, "theta must lie in [0.5, 1]");
    if (rannacher_steps < 0) throw Error(ErrorKind::Config, "rannacher_steps must be nonnegative");
    if (!(psor_omega > 0.0 && psor_omega < 2.0)) throw Error(ErrorKind::Config, "psor_omega must lie in (0, 2)");
    if (!(psor_tol > 0.0)) throw Error(ErrorKind::Config, "psor_tol must be positive");
    if (psor_max_iter < 1) throw Error(ErrorKind::Config, "psor_max_iter must be positive");
    if (!(contact_tol > 0.0)) throw Error(ErrorKind::Config, "contact_tol must be positive");
}

void DiscreteOperator::apply(std::span<const double> u, std::span<double> out) const {
    const std::size_t n = size();
    out[0] = 0.0;
    out[n - 1] = 0.0;
    for (std::size_t j = 1; j + 1 < n; ++j) out[j] = sub[j] * u[j - 1] + diag[j] * u[j] + sup[j] * u[j + 1];
}

DiscreteOperator assemble_operator(const DualGrid& grid, const DerivedConstants& constants, double r) {
    const std::size_t n = grid.M() + 1;
    const double a2 = constants.a2;
    const double dz = grid.dz;
    const double diff = 0.5 * a2 / (dz * dz);

    DiscreteOperator op;
    op.sub.assign(n, 0.0);
    op.diag.assign(n, 0.0);
    op.sup.assign(n, 0.0);
    // Drift +(a^2/2) u_z shares the diffusion coefficient, so central
    // differencing keeps the off-diagonals nonpositive iff dz <= 2.
    op.upwinded = dz > 2.0;
    const double adv = 0.5 * a2;
    for (std::size_t j = 1; j + 1 < n; ++j) {
        if (!op.upwinded) {
            op.sub[j] = -diff - adv / (2.0 * dz);
            op.diag[j] = 2.0 * diff + r;
            op.sup[j] = -diff + adv / (2.0 * dz);
        } else {
            op.sub[j] = -diff - adv / dz;
            op.diag[j] = 2.0 * diff + adv / dz + r;
            op.sup[j] = -diff;
        }
        if (op.sub[j] > 0.0 || op.sup[j] > 0.0) throw Error(ErrorKind::Numeric, "non-monotone scheme");
    }
    return op;
}

void solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                       std::span<const double> sup, std::span<const double> rhs, std::span<double> out) {
    const std::size_t n = diag.size();
    std::vector<double> c(n), d(n);
    double pivot = diag[0];
    if (std::abs(pivot) < 1e-300) throw Error(ErrorKind::Numeric, "singular tridiagonal system");
    c[0] = sup[0] / pivot;
    d[0] = rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = diag[i] - sub[i] * c[i - 1];
        if (std::abs(pivot) < 1e-300) throw Error(ErrorKind::Numeric, "singular tridiagonal system");
        c[i] = (i + 1 < n) ? sup[i] / pivot : 0.0;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    out[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) out[i] = d[i] - c[i] * out[i + 1];
}

namespace {

// Interior system (I + theta dt L) u = b on rows 1..M-1, boundary values folded into b.
struct ThetaSystem {
    std::vector<double> sub, diag, sup, rhs;
};

ThetaSystem theta_system(std::span<const double> u_next, const DiscreteOperator& op, double dt, double theta,
                         double left, double right) {
    const std::size_t n = op.size();
    const std::size_t m = n - 2;
    ThetaSystem s;
    s.sub.resize(m);
    s.diag.resize(m);
    s.sup.resize(m);
    s.rhs.resize(m);
    const double wi = theta * dt;
    const double we = (1.0 - theta) * dt;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + 1;
        s.sub[i] = wi * op.sub[j];
        s.diag[i] = 1.0 + wi * op.diag[j];
        s.sup[i] = wi * op.sup[j];
        const double lu = op.sub[j] * u_next[j - 1] + op.diag[j] * u_next[j] + op.sup[j] * u_next[j + 1];
        s.rhs[i] = u_next[j] - we * lu;
    }
    s.rhs[0] -= s.sub[0] * left;
    s.rhs[m - 1] -= s.sup[m - 1] * right;
    s.sub[0] = 0.0;
    s.sup[m - 1] = 0.0;
    return s;
}

void check_row(std::span<const double> u_next, const DiscreteOperator& op) {
    if (u_next.size() != op.size() || op.size() < 3)
        throw Error(ErrorKind::Shape, "shape error: row length must match the operator");
}

}  // namespace

std::vector<double> step_linear(std::span<const double> u_next, const DiscreteOperator& op, double dt,
                                double theta, double boundary_left, double boundary_right) {
    check_row(u_next, op);
    const auto s = theta_system(u_next, op, dt, theta, boundary_left, boundary_right);
    std::vector<double> u(op.size());
    solve_tridiagonal(s.sub, s.diag, s.sup, s.rhs, std::span<double>(u).subspan(1, s.diag.size()));
    u.front() = boundary_left;
    u.back() = boundary_right;
    return u;
}

ProjectedStep step_projected(std::span<const double> u_next, const DiscreteOperator& op, double dt,
                             double theta, std::span<const double> phi_row, double boundary_left,
                             double boundary_right, const SolverConfig& config) {
    check_row(u_next, op);
    if (phi_row.size() != op.size()) throw Error(ErrorKind::Shape, "shape error: obstacle row length");
    const auto s = theta_system(u_next, op, dt, theta, boundary_left, boundary_right);
    const std::size_t m = s.diag.size();

    ProjectedStep out;
    out.u.resize(op.size());
    auto& u = out.u;
    u.front() = boundary_left;
    u.back() = boundary_right;
    for (std::size_t j = 1; j + 1 < u.size(); ++j) u[j] = std::max(u_next[j], phi_row[j]);

    const double omega = config.psor_omega;
    for (int it = 1; it <= config.psor_max_iter; ++it) {
        double change = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j = i + 1;
            // Boundary couplings are already folded into rhs.
            const double lower = (i > 0) ? s.sub[i] * u[j - 1] : 0.0;
            const double upper = (i + 1 < m) ? s.sup[i] * u[j + 1] : 0.0;
            const double gs = (s.rhs[i] - lower - upper) / s.diag[i];
            const double next = std::max(phi_row[j], u[j] + omega * (gs - u[j]));
            change = std::max(change, std::abs(next - u[j]));
            u[j] = next;
        }
        out.iterations = it;
        out.last_change = change;
        if (change <= config.psor_tol) return out;
    }
    throw ConvergenceError("PSOR non-convergence: final change " + std::to_string(out.last_change),
                           out.last_change, out.iterations);
}

std::vector<double> step_penalty(std::span<const double> u_next, const DiscreteOperator& op, double dt,
                                 double theta, std::span<const double> phi_row, double boundary_left,
                                 double boundary_right, double penalty) {
    check_row(u_next, op);
    const auto s = theta_system(u_next, op, dt, theta, boundary_left, boundary_right);
    const std::size_t m = s.diag.size();
    std::vector<double> u(op.size());
    u.front() = boundary_left;
    u.back() = boundary_right;
    auto interior = std::span<double>(u).subspan(1, m);

    std::vector<std::uint8_t> active(m, 0);
    std::vector<double> diag(m), rhs(m);
    for (int it = 0; it < 200; ++it) {
        for (std::size_t i = 0; i < m; ++i) {
            diag[i] = s.diag[i] + (active[i] ? penalty : 0.0);
            rhs[i] = s.rhs[i] + (active[i] ? penalty * phi_row[i + 1] : 0.0);
        }
        solve_tridiagonal(s.sub, diag, s.sup, rhs, interior);
        bool changed = false;
        for (std::size_t i = 0; i < m; ++i) {
            const std::uint8_t a = interior[i] < phi_row[i + 1] ? 1 : 0;
            if (a != active[i]) {
                active[i] = a;
                changed = true;
            }
        }
        if (!changed) return u;
    }
    throw Error(ErrorKind::Numeric, "penalty iteration did not settle");
}

double merton_dual(double y, double t, const ProblemSpec& spec, const DerivedConstants& constants) {
    const double g = spec.utility.gamma;
    return (1.0 - g) / g * std::exp((constants.A - spec.market.r) * (spec.T - t)) * std::pow(y, g / (g - 1.0));
}

BoundaryData default_boundary_data(const ProblemSpec& spec, const DualGrid& grid) {
    const auto constants = derived_constants(spec);
    const Obstacle obstacle(spec.utility);
    const double y_min = grid.y.front();
    const double right = dual_boundary_value(spec.utility);
    BoundaryData d;
    d.terminal = [obstacle](double y) { return obstacle.value(y); };
    d.left = [spec, constants, y_min](double t) {
        return merton_dual(y_min, t, spec, constants) + spec.utility.K * y_min;
    };
    d.right = [right](double) { return right; };
    return d;
}

namespace {

DualSolution backward_solve(const ProblemSpec& spec, const DualGrid& grid, const SolverConfig& config,
                            const BoundaryData& data, bool obstacle) {
    config.validate();
    DualSolution sol;
    sol.spec = spec;
    sol.constants = derived_constants(spec);
    sol.grid = grid;
    sol.config = config;
    sol.obstacle = obstacle;

    const std::size_t cols = grid.M() + 1;
    const std::size_t N = grid.N();
    const Obstacle ob(spec.utility);
    sol.phi.resize(cols);
    for (std::size_t j = 0; j < cols; ++j) sol.phi[j] = ob.value(grid.y[j]);

    sol.u.assign((N + 1) * cols, 0.0);
    sol.psor_iterations.assign(N + 1, 0);
    sol.step_theta.assign(N + 1, 0.0);

    const auto op = assemble_operator(grid, sol.constants, spec.market.r);
    double* terminal = sol.u.data() + N * cols;
    for (std::size_t j = 0; j < cols; ++j) terminal[j] = data.terminal(grid.y[j]);
    terminal[cols - 1] = data.right(grid.t[N]);

    std::vector<double> phi_row = sol.phi;
    if (!obstacle) std::fill(phi_row.begin(), phi_row.end(), -std::numeric_limits<double>::infinity());

    for (std::size_t step = 0; step < N; ++step) {
        const std::size_t k = N - 1 - step;
        const double theta = static_cast<int>(step) < config.rannacher_steps ? 1.0 : config.theta;
        std::span<const double> next(sol.u.data() + (k + 1) * cols, cols);
        const double left = data.left(grid.t[k]);
        const double right = data.right(grid.t[k]);
        std::vector<double> now;
        if (obstacle) {
            auto res = step_projected(next, op, grid.dt, theta, phi_row, left, right, config);
            sol.psor_iterations[k] = res.iterations;
            now = std::move(res.u);
        } else {
            now = step_linear(next, op, grid.dt, theta, left, right);
        }
        std::copy(now.begin(), now.end(), sol.u.begin() + static_cast<std::ptrdiff_t>(k * cols));
        sol.step_theta[k] = theta;
    }

    sol.contact.assign((N + 1) * cols, 0);
    if (obstacle) {
        for (std::size_t k = 0; k <= N; ++k)
            for (std::size_t j = 0; j < cols; ++j)
                sol.contact[k * cols + j] = (sol.u[k * cols + j] - sol.phi[j] <= config.contact_tol) ? 1 : 0;
    }
    return sol;
}

}  // namespace

DualSolution solve_dual_vi(const ProblemSpec& spec, const DualGrid& grid, const SolverConfig& config) {
    spec.validate();
    if (classify_regime(spec) != Regime::FreeBoundary)
        throw Error(ErrorKind::Config, "config error: obstacle solve requires the free-boundary regime");
    return backward_solve(spec, grid, config, default_boundary_data(spec, grid), true);
}

DualSolution solve_dual_linear(const ProblemSpec& spec, const DualGrid& grid, const SolverConfig& config,
                               const BoundaryData* override_data) {
    spec.validate();
    if (override_data == nullptr) {
        if (classify_regime(spec) != Regime::NeverStop)
            throw Error(ErrorKind::Config, "config error: linear solve requires the never-stop regime");
        return backward_solve(spec, grid, config, default_boundary_data(spec, grid), false);
    }
    return backward_solve(spec, grid, config, *override_data, false);
}

ResidualReport residual_report(const DualSolution& sol) {
    const std::size_t cols = sol.cols();
    const std::size_t N = sol.grid.N();
    const auto op = assemble_operator(sol.grid, sol.constants, sol.spec.market.r);
    const double dt = sol.grid.dt;

    ResidualReport rep;
    rep.steps.resize(N + 1);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t kk = 0; kk <= static_cast<std::ptrdiff_t>(N); ++kk) {
        const auto k = static_cast<std::size_t>(kk);
        StepResidual& s = rep.steps[k];
        const auto now = sol.row(k);
        for (std::size_t j = 0; j < cols; ++j) s.obstacle_violation = std::max(s.obstacle_violation, sol.phi[j] - now[j]);
        if (k == N) continue;

        const auto next = sol.row(k + 1);
        const double theta = sol.step_theta[k];
        double scale = 0.0;
        for (double v : now) scale = std::max(scale, std::abs(v));
        for (std::size_t j = 1; j + 1 < cols; ++j) {
            const double lu_now = op.sub[j] * now[j - 1] + op.diag[j] * now[j] + op.sup[j] * now[j + 1];
            const double lu_next = op.sub[j] * next[j - 1] + op.diag[j] * next[j] + op.sup[j] * next[j + 1];
            const double res = (now[j] - next[j]) + dt * (theta * lu_now + (1.0 - theta) * lu_next);
            const double gap = sol.obstacle ? now[j] - sol.phi[j] : std::numeric_limits<double>::infinity();
            s.complementarity = std::max(s.complementarity, std::abs(std::min(res, gap)));
            if (!sol.contact_row(k)[j]) s.pde = std::max(s.pde, std::abs(res) / (dt * scale));
        }
    }
    for (const auto& s : rep.steps) {
        rep.max_complementarity = std::max(rep.max_complementarity, s.complementarity);
        rep.max_pde = std::max(rep.max_pde, s.pde);
        rep.max_obstacle_violation = std::max(rep.max_obstacle_violation, s.obstacle_violation);
    }
    return rep;
}

}  // namespace stopvest
