#include "stopvest/primal.hpp"

#include "stopvest/error.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

namespace stopvest {

namespace {

enum class Stencil { Central, Forward, Backward, Contact };

Stencil choose_stencil(std::span<const std::uint8_t> contact, std::size_t j, bool obstacle) {
    const std::size_t M = contact.size() - 1;
    // Inside a run of contact nodes the gap is identically zero.
    if (obstacle && contact[j] && ((j > 0 && contact[j - 1]) || (j < M && contact[j + 1]))) return Stencil::Contact;
    if (j == 0) return Stencil::Forward;
    if (j == M) return Stencil::Backward;
    return Stencil::Central;
}

}  // namespace

DualDerivatives dual_derivatives(const DualSolution& sol, std::size_t k) {
    const auto u = sol.row(k);
    const auto contact = sol.contact_row(k);
    const auto& y = sol.grid.y;
    const double dz = sol.grid.dz;
    const std::size_t n = u.size();
    const Obstacle ob(sol.spec.utility);

    // Contact nodes are identified with the obstacle.
    std::vector<double> gap(n);
    for (std::size_t j = 0; j < n; ++j) gap[j] = (sol.obstacle && contact[j]) ? 0.0 : u[j] - sol.phi[j];

    DualDerivatives d;
    d.du_dy.resize(n);
    d.d2u_dy2.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        double gz = 0.0, gzz = 0.0;
        switch (choose_stencil(contact, j, sol.obstacle)) {
            case Stencil::Contact: break;
            case Stencil::Central:
                gz = (gap[j + 1] - gap[j - 1]) / (2.0 * dz);
                gzz = (gap[j + 1] - 2.0 * gap[j] + gap[j - 1]) / (dz * dz);
                break;
            case Stencil::Forward:
                gz = (-3.0 * gap[j] + 4.0 * gap[j + 1] - gap[j + 2]) / (2.0 * dz);
                gzz = (n > j + 3) ? (2.0 * gap[j] - 5.0 * gap[j + 1] + 4.0 * gap[j + 2] - gap[j + 3]) / (dz * dz)
                                  : (gap[j] - 2.0 * gap[j + 1] + gap[j + 2]) / (dz * dz);
                break;
            case Stencil::Backward:
                gz = (3.0 * gap[j] - 4.0 * gap[j - 1] + gap[j - 2]) / (2.0 * dz);
                gzz = (j >= 3) ? (2.0 * gap[j] - 5.0 * gap[j - 1] + 4.0 * gap[j - 2] - gap[j - 3]) / (dz * dz)
                               : (gap[j] - 2.0 * gap[j - 1] + gap[j - 2]) / (dz * dz);
                // The gap is nonincreasing and vanishes at the pinned right end, so its slope
                // there cannot be positive; a boundary inside the last cell would make it so.
                if (sol.obstacle && contact[j]) gz = std::min(gz, 0.0);
                break;
        }
        const double yj = y[j];
        d.du_dy[j] = ob.d1(yj) + gz / yj;
        d.d2u_dy2[j] = ob.d2(yj) + (gzz - gz) / (yj * yj);
    }
    return d;
}

PrimalSlice reconstruct_slice(const DualSolution& sol, std::size_t k) {
    const auto u = sol.row(k);
    const auto contact = sol.contact_row(k);
    const auto& y = sol.grid.y;
    const std::size_t n = u.size();
    const auto d = dual_derivatives(sol, k);

    for (std::size_t j = 1; j < n; ++j) {
        if (!(-d.du_dy[j] < -d.du_dy[j - 1]))
            throw Error(ErrorKind::Reconstruction, "reconstruction failed: non-convex dual slice at t = " +
                                                       std::to_string(sol.grid.t[k]));
    }

    PrimalSlice s;
    s.t = sol.grid.t[k];
    s.x.resize(n);
    s.V.resize(n);
    s.y.resize(n);
    s.du_dy.resize(n);
    s.d2u_dy2.resize(n);
    s.pi_scale.resize(n);
    s.in_exercise.resize(n);
    // Increasing x is decreasing y.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = n - 1 - i;
        s.x[i] = -d.du_dy[j];
        s.V[i] = u[j] - y[j] * d.du_dy[j];
        s.y[i] = y[j];
        s.du_dy[i] = d.du_dy[j];
        s.d2u_dy2[i] = d.d2u_dy2[j];
        s.pi_scale[i] = y[j] * d.d2u_dy2[j];
        s.in_exercise[i] = contact[j];
    }
    return s;
}

Eigen::VectorXd optimal_portfolio(double y, double d2u_dy2, const DerivedConstants& constants) {
    if (!(y > 0.0)) throw Error(ErrorKind::Domain, "optimal_portfolio requires y > 0");
    if (!(d2u_dy2 > 0.0)) throw Error(ErrorKind::Domain, "convexity violated at node");
    return constants.kelly * (y * d2u_dy2);
}

namespace {

void merge(ConstraintCertificate& into, const ConstraintCertificate& c) {
    if (c.min_residual < into.min_residual) {
        into.min_residual = c.min_residual;
        into.residual_time = c.residual_time;
        into.residual_node = c.residual_node;
    }
    if (c.min_gap < into.min_gap) {
        into.min_gap = c.min_gap;
        into.gap_time = c.gap_time;
        into.gap_node = c.gap_node;
    }
    into.max_abs_contact_residual = std::max(into.max_abs_contact_residual, c.max_abs_contact_residual);
    into.max_abs_contact_gap = std::max(into.max_abs_contact_gap, c.max_abs_contact_gap);
    into.undefined_nodes += c.undefined_nodes;
}

void finalize(ConstraintCertificate& c) {
    c.passed = c.undefined_nodes == 0 && c.min_residual >= -c.tolerance && c.min_gap >= -c.tolerance &&
               c.max_abs_contact_residual <= c.tolerance && c.max_abs_contact_gap <= c.tolerance;
}

}  // namespace

ConstraintCertificate verify_constraint(const DualSolution& sol, std::size_t k, double tolerance) {
    const auto u = sol.row(k);
    const auto contact = sol.contact_row(k);
    const auto& y = sol.grid.y;
    const auto d = dual_derivatives(sol, k);
    const auto& util = sol.spec.utility;

    ConstraintCertificate c;
    c.tolerance = tolerance;
    c.min_residual = std::numeric_limits<double>::infinity();
    c.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < u.size(); ++j) {
        const double gap = marginal_utility_gap(d.du_dy[j], y[j], util);
        if (gap < c.min_gap) {
            c.min_gap = gap;
            c.gap_time = k;
            c.gap_node = j;
        }
        if (!(d.du_dy[j] < util.K)) {
            ++c.undefined_nodes;
            continue;
        }
        const double res = constraint_residual(u[j], d.du_dy[j], y[j], util);
        if (res < c.min_residual) {
            c.min_residual = res;
            c.residual_time = k;
            c.residual_node = j;
        }
        // The right end is pinned to the obstacle; alone it is not a free-boundary contact.
        const bool pinned_only = j + 1 == u.size() && !(j > 0 && contact[j - 1]);
        if (contact[j] && !pinned_only) {
            c.max_abs_contact_residual = std::max(c.max_abs_contact_residual, std::abs(res));
            c.max_abs_contact_gap = std::max(c.max_abs_contact_gap, std::abs(gap));
        }
    }
    finalize(c);
    return c;
}

ConstraintCertificate verify_constraints(const DualSolution& sol, double tolerance) {
    const std::size_t N = sol.grid.N();
    std::vector<ConstraintCertificate> per(N);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(N); ++k)
        per[static_cast<std::size_t>(k)] = verify_constraint(sol, static_cast<std::size_t>(k), tolerance);

    ConstraintCertificate all;
    all.tolerance = tolerance;
    all.min_residual = std::numeric_limits<double>::infinity();
    all.min_gap = std::numeric_limits<double>::infinity();
    for (const auto& c : per) merge(all, c);
    finalize(all);
    return all;
}

PolicySurface::PolicySurface(const DualSolution& sol, std::vector<PrimalSlice> slices, FreeBoundaryCurve boundary)
    : spec_(sol.spec),
      constants_(sol.constants),
      times_(sol.grid.t),
      slices_(std::move(slices)),
      boundary_(std::move(boundary)) {
    if (slices_.size() != times_.size()) throw Error(ErrorKind::Shape, "shape error: one slice per time node");
}

namespace {

FreeBoundaryCurve boundary_of(const DualSolution& sol) {
    return sol.obstacle ? extract_h(sol) : FreeBoundaryCurve{};
}

}  // namespace

PolicySurface PolicySurface::build(const DualSolution& sol) {
    const std::size_t rows = sol.rows();
    std::vector<PrimalSlice> slices(rows);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(rows); ++k) {
        try {
            slices[static_cast<std::size_t>(k)] = reconstruct_slice(sol, static_cast<std::size_t>(k));
        } catch (...) {
#pragma omp critical(stopvest_reconstruct)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return PolicySurface(sol, std::move(slices), boundary_of(sol));
}

PolicySurface PolicySurface::build_serial(const DualSolution& sol) {
    std::vector<PrimalSlice> slices;
    slices.reserve(sol.rows());
    for (std::size_t k = 0; k < sol.rows(); ++k) slices.push_back(reconstruct_slice(sol, k));
    return PolicySurface(sol, std::move(slices), boundary_of(sol));
}

std::pair<std::size_t, double> PolicySurface::bracket(double t) const {
    const std::size_t last = times_.size() - 1;
    if (t <= times_.front()) return {0, 0.0};
    if (t >= times_.back()) return {last - 1, 1.0};
    const double dt = times_[1] - times_[0];
    auto k = static_cast<std::size_t>((t - times_.front()) / dt);
    k = std::min(k, last - 1);
    while (k > 0 && times_[k] > t) --k;
    while (k + 1 < last && times_[k + 1] < t) ++k;
    return {k, (t - times_[k]) / (times_[k + 1] - times_[k])};
}

double PolicySurface::interpolate(std::size_t k, double x, const std::vector<double> PrimalSlice::*field,
                                  std::size_t& hint) const {
    const auto& xs = slices_[k].x;
    const auto& fs = slices_[k].*field;
    const std::size_t n = xs.size();
    if (x <= xs.front()) {
        hint = 0;
        return fs.front();
    }
    if (x >= xs.back()) {
        hint = n - 2;
        return fs.back();
    }
    std::size_t i = std::min(hint, n - 2);
    // Paths move little between steps: walk a few cells, else bisect.
    int walk = 0;
    while (walk < 4 && xs[i] > x) {
        --i;
        ++walk;
    }
    while (walk < 4 && xs[i + 1] < x) {
        ++i;
        ++walk;
    }
    if (xs[i] > x || xs[i + 1] < x) {
        auto it = std::upper_bound(xs.begin(), xs.end(), x);
        i = static_cast<std::size_t>(std::distance(xs.begin(), it)) - 1;
    }
    hint = i;
    const double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    return fs[i] + w * (fs[i + 1] - fs[i]);
}

double PolicySurface::x_max(double t) const {
    const auto [k, w] = bracket(t);
    (void)w;
    return std::min(slices_[k].x.back(), slices_[k + 1].x.back());
}

double PolicySurface::g_at(double t) const {
    const auto& g = boundary_.g;
    if (g.empty()) return -std::numeric_limits<double>::infinity();
    const auto& ts = boundary_.t;
    if (t <= ts.front()) return g.front();
    if (t >= ts.back()) return g.back();
    const auto [k, w] = bracket(t);
    return g[k] + w * (g[k + 1] - g[k]);
}

bool PolicySurface::stop_at(double x, double t) const { return x <= g_at(t); }

double PolicySurface::value_at(double x, double t) const {
    if (!(x >= 0.0)) throw Error(ErrorKind::Domain, "value_at requires x >= 0");
    if (!(t >= times_.front() && t <= times_.back())) throw Error(ErrorKind::Domain, "value_at: t outside [0, T]");
    if (x > x_max(t)) throw Error(ErrorKind::Domain, "extrapolation refused");
    if (stop_at(x, t) || t >= times_.back()) return exercise_utility(x, spec_.utility);
    const auto [k, w] = bracket(t);
    std::size_t h0 = slices_[k].x.size() / 2, h1 = h0;
    const double v0 = interpolate(k, x, &PrimalSlice::V, h0);
    const double v1 = interpolate(k + 1, x, &PrimalSlice::V, h1);
    return (1.0 - w) * v0 + w * v1;
}

double PolicySurface::pi_scale_at(double x, double t) const {
    if (!(x > 0.0)) return 0.0;
    if (x > x_max(t)) throw Error(ErrorKind::Domain, "extrapolation refused");
    const auto [k, w] = bracket(t);
    std::size_t h0 = slices_[k].x.size() / 2, h1 = h0;
    const double s0 = interpolate(k, x, &PrimalSlice::pi_scale, h0);
    const double s1 = interpolate(k + 1, x, &PrimalSlice::pi_scale, h1);
    return (1.0 - w) * s0 + w * s1;
}

PolicySurface::TimePoint PolicySurface::time_point(double t) const {
    const auto [k, w] = bracket(t);
    TimePoint p{k, w, g_at(t), std::min(slices_[k].x.back(), slices_[k + 1].x.back())};
    return p;
}

double PolicySurface::pi_scale_at(double x, const TimePoint& at, std::size_t& hint_lo, std::size_t& hint_hi) const {
    if (!(x > 0.0)) return 0.0;
    const double xq = std::min(x, at.x_cap);
    const double s0 = interpolate(at.k, xq, &PrimalSlice::pi_scale, hint_lo);
    const double s1 = interpolate(at.k + 1, xq, &PrimalSlice::pi_scale, hint_hi);
    return (1.0 - at.w) * s0 + at.w * s1;
}

Eigen::VectorXd PolicySurface::pi_at(double x, double t) const { return constants_.kelly * pi_scale_at(x, t); }

}  // namespace stopvest
