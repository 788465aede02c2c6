#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace stopvest {

/// Market with a riskless rate and n correlated risky assets.
struct MarketParams {
    double r = 0.0;            // riskless rate, per year
    Eigen::VectorXd mu;        // excess appreciation rates
    Eigen::MatrixXd Sigma;     // covariance, sigma' sigma

    /// Builds the covariance from volatility vectors stored as matrix rows.
    static MarketParams from_volatility(double r, Eigen::VectorXd mu, const Eigen::MatrixXd& sigma);

    std::size_t assets() const { return static_cast<std::size_t>(mu.size()); }
};

/// Shifted CRRA utility U(x + K) with U(x) = x^gamma / gamma.
struct UtilityParams {
    double gamma = 0.5;
    double K = 1.0;
};

struct ProblemSpec {
    MarketParams market;
    UtilityParams utility;
    double T = 1.0;

    /// Throws Error(Config | Degenerate | Shape) on any violated invariant.
    void validate() const;
};

enum class Regime { StopImmediately, NeverStop, FreeBoundary };

std::string_view to_string(Regime regime);

struct DerivedConstants {
    double a2 = 0.0;     // mu' Sigma^-1 mu
    double A = 0.0;      // growth constant of the upper dual bound
    double beta = 0.0;   // Merton primal exponent
    Eigen::VectorXd kelly;  // Sigma^-1 mu
};

struct MarketPriceOfRisk {
    double a2;
    Eigen::VectorXd kelly;
};

/// a^2 = mu' Sigma^-1 mu via a Cholesky solve. The solve vector is returned
/// as the Kelly direction.
MarketPriceOfRisk compute_a2(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma);

/// Regime from the sign of c = a^2 gamma / (2 (1 - gamma)) - r. The two
/// closed inequalities own their endpoints.
Regime classify_regime(double a2, double gamma, double r);
Regime classify_regime(const ProblemSpec& spec);

DerivedConstants derived_constants(const ProblemSpec& spec);

/// (x + K)^gamma / gamma, the exercise payoff.
double exercise_utility(double x, const UtilityParams& utility);

/// Value function when stopping at once is optimal; requires that regime.
double trivial_value_stop(double x, const ProblemSpec& spec);

}  // namespace stopvest
