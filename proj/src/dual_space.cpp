#include "stopvest/dual_space.hpp"

#include "stopvest/error.hpp"

#include <algorithm>
#include <cmath>

namespace stopvest {

DualDomain make_dual_domain(const ProblemSpec& spec, double y_min_factor) {
    if (!(y_min_factor > 0.0 && y_min_factor <= 0.1))
        throw Error(ErrorKind::Config, "y_min_factor must lie in (0, 0.1]");
    DualDomain d;
    d.y0 = std::pow(spec.utility.K, spec.utility.gamma - 1.0);
    d.y_min = y_min_factor * d.y0;
    d.T = spec.T;
    return d;
}

double Obstacle::value(double y) const {
    if (!(y > 0.0)) throw Error(ErrorKind::Domain, "obstacle requires y > 0");
    return (1.0 - gamma_) / gamma_ * std::pow(y, gamma_ / (gamma_ - 1.0)) + K_ * y;
}

double Obstacle::d1(double y) const {
    if (!(y > 0.0)) throw Error(ErrorKind::Domain, "obstacle requires y > 0");
    return K_ - std::pow(y, 1.0 / (gamma_ - 1.0));
}

double Obstacle::d2(double y) const {
    if (!(y > 0.0)) throw Error(ErrorKind::Domain, "obstacle requires y > 0");
    return std::pow(y, (2.0 - gamma_) / (gamma_ - 1.0)) / (1.0 - gamma_);
}

double phi(double y, const UtilityParams& utility) { return Obstacle(utility).value(y); }

double dual_boundary_value(const UtilityParams& utility) {
    return std::pow(utility.K, utility.gamma) / utility.gamma;
}

namespace {

// Maximum over [lo, hi] of the parabola through three points.
double parabola_max(const double* xs, const double* fs, double lo, double hi) {
    const double x0 = xs[0], x1 = xs[1], x2 = xs[2];
    const double f0 = fs[0], f1 = fs[1], f2 = fs[2];
    const double d01 = (f1 - f0) / (x1 - x0);
    const double d12 = (f2 - f1) / (x2 - x1);
    const double c2 = (d12 - d01) / (x2 - x0);
    if (!(c2 < 0.0)) return std::max({f0, f1, f2});
    const double c1 = d01 - c2 * (x0 + x1);
    const double xv = std::clamp(-c1 / (2.0 * c2), lo, hi);
    return f0 + (xv - x0) * (d01 + c2 * (xv - x1));
}

}  // namespace

double legendre_transform(std::span<const double> x, std::span<const double> V, double y) {
    const std::size_t n = x.size();
    if (n != V.size() || n < 3) throw Error(ErrorKind::Shape, "shape error: need at least 3 samples");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x[i] > x[i - 1])) throw Error(ErrorKind::Domain, "table not strictly increasing in x");

    double prev_slope = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double s = (V[i] - V[i - 1]) / (x[i] - x[i - 1]);
        if (i > 1 && !(s < prev_slope)) throw Error(ErrorKind::Domain, "concavity violated");
        prev_slope = s;
    }

    // Admissible slopes: the chord range widened by one cell of slope change
    // at each end, which covers the endpoint derivatives of smooth data.
    const double s_first = (V[1] - V[0]) / (x[1] - x[0]);
    const double s_second = (V[2] - V[1]) / (x[2] - x[1]);
    const double s_last = (V[n - 1] - V[n - 2]) / (x[n - 1] - x[n - 2]);
    const double s_penult = (V[n - 2] - V[n - 3]) / (x[n - 2] - x[n - 3]);
    const double hi = s_first + (s_first - s_second);
    const double lo = s_last - (s_penult - s_last);
    if (y > hi || y < lo) throw Error(ErrorKind::Domain, "extrapolation refused");

    std::size_t best = 0;
    double best_val = V[0] - x[0] * y;
    for (std::size_t i = 1; i < n; ++i) {
        const double f = V[i] - x[i] * y;
        if (f > best_val) {
            best_val = f;
            best = i;
        }
    }

    const std::size_t c = std::clamp<std::size_t>(best, 1, n - 2);
    const double xs[3] = {x[c - 1], x[c], x[c + 1]};
    const double fs[3] = {V[c - 1] - x[c - 1] * y, V[c] - x[c] * y, V[c + 1] - x[c + 1] * y};
    return std::max(best_val, parabola_max(xs, fs, xs[0], xs[2]));
}

double constraint_residual(double u, double du_dy, double y, const UtilityParams& utility) {
    if (!(du_dy < utility.K)) throw Error(ErrorKind::Domain, "constraint term undefined");
    return u - y * du_dy - std::pow(utility.K - du_dy, utility.gamma) / utility.gamma;
}

double marginal_utility_gap(double du_dy, double y, const UtilityParams& utility) {
    if (!(y > 0.0)) throw Error(ErrorKind::Domain, "marginal_utility_gap requires y > 0");
    return (utility.K - std::pow(y, 1.0 / (utility.gamma - 1.0))) - du_dy;
}

}  // namespace stopvest
