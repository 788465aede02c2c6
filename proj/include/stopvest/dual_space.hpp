#pragma once

#include "stopvest/model.hpp"

#include <span>

namespace stopvest {

/// Truncated dual domain (y_min, y0] x [0, T].
struct DualDomain {
    double y0 = 1.0;     // K^(gamma-1), marginal utility at zero wealth
    double y_min = 1e-3;
    double T = 1.0;
};

/// y_min = y_min_factor * y0; the factor must lie in (0, 0.1].
DualDomain make_dual_domain(const ProblemSpec& spec, double y_min_factor = 1e-3);

/// Terminal dual datum phi(y) = ((1-gamma)/gamma) y^(gamma/(gamma-1)) + K y,
/// which is also the obstacle of the dual variational inequality.
class Obstacle {
public:
    Obstacle() = default;
    explicit Obstacle(const UtilityParams& utility) : gamma_(utility.gamma), K_(utility.K) {}

    double value(double y) const;
    /// K - y^(1/(gamma-1)); minus the terminal wealth map.
    double d1(double y) const;
    double d2(double y) const;

    double gamma() const { return gamma_; }
    double K() const { return K_; }

private:
    double gamma_ = 0.5;
    double K_ = 1.0;
};

double phi(double y, const UtilityParams& utility);

/// K^gamma / gamma; the dual value at y0 for every t.
double dual_boundary_value(const UtilityParams& utility);

/// Brute-force dual transform max_j (V_j - x_j y) over a sampled concave table,
/// refined by a three-point quadratic fit around the discrete maximiser.
/// Verification oracle only.
double legendre_transform(std::span<const double> x, std::span<const double> V, double y);

/// u - y u_y - (1/gamma) (K - u_y)^gamma. Nonnegative means the dual
/// constraint holds. Throws Error(Domain, "constraint term undefined") if u_y >= K.
double constraint_residual(double u, double du_dy, double y, const UtilityParams& utility);

/// (K - y^(1/(gamma-1))) - u_y; nonnegative everywhere, zero on the exercise set.
double marginal_utility_gap(double du_dy, double y, const UtilityParams& utility);

}  // namespace stopvest
