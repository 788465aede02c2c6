#include "stopvest/model.hpp"

#include "stopvest/error.hpp"

#include <cmath>

namespace stopvest {

MarketParams MarketParams::from_volatility(double r, Eigen::VectorXd mu, const Eigen::MatrixXd& sigma) {
    MarketParams m;
    m.r = r;
    m.mu = std::move(mu);
    m.Sigma = sigma.transpose() * sigma;
    return m;
}

void ProblemSpec::validate() const {
    if (!(market.r > 0.0)) throw Error(ErrorKind::Config, "r must be positive");
    if (market.mu.size() < 1) throw Error(ErrorKind::Shape, "shape error: at least one risky asset required");
    if (market.Sigma.rows() != market.mu.size() || market.Sigma.cols() != market.mu.size())
        throw Error(ErrorKind::Shape, "shape error: Sigma must be n x n with n = len(mu)");
    if (!(utility.gamma > 0.0 && utility.gamma < 1.0)) throw Error(ErrorKind::Config, "gamma out of (0,1)");
    if (!(utility.K > 0.0)) throw Error(ErrorKind::Config, "K must be positive");
    if (!(T > 0.0)) throw Error(ErrorKind::Config, "T must be positive");
    compute_a2(market.mu, market.Sigma);
}

std::string_view to_string(Regime regime) {
    switch (regime) {
        case Regime::StopImmediately: return "stop-immediately";
        case Regime::NeverStop: return "never-stop";
        case Regime::FreeBoundary: return "free-boundary";
    }
    return "unknown";
}

MarketPriceOfRisk compute_a2(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma) {
    const auto n = mu.size();
    if (n < 1 || Sigma.rows() != n || Sigma.cols() != n)
        throw Error(ErrorKind::Shape, "shape error");
    if (!mu.allFinite() || !Sigma.allFinite())
        throw Error(ErrorKind::Domain, "non-finite market parameters");
    const double scale = Sigma.cwiseAbs().maxCoeff();
    if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw Error(ErrorKind::Degenerate, "degenerate covariance: Sigma not symmetric");

    Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
    if (llt.info() != Eigen::Success || scale == 0.0)
        throw Error(ErrorKind::Degenerate, "degenerate covariance");
    Eigen::VectorXd w = llt.solve(mu);
    return {mu.dot(w), std::move(w)};
}

Regime classify_regime(double a2, double gamma, double r) {
    const double c = a2 * gamma / (2.0 * (1.0 - gamma)) - r;
    if (c <= -r * gamma) return Regime::StopImmediately;
    if (c >= 0.0) return Regime::NeverStop;
    return Regime::FreeBoundary;
}

Regime classify_regime(const ProblemSpec& spec) {
    spec.validate();
    const auto mpr = compute_a2(spec.market.mu, spec.market.Sigma);
    return classify_regime(mpr.a2, spec.utility.gamma, spec.market.r);
}

DerivedConstants derived_constants(const ProblemSpec& spec) {
    auto mpr = compute_a2(spec.market.mu, spec.market.Sigma);
    const double g = spec.utility.gamma;
    DerivedConstants c;
    c.a2 = mpr.a2;
    c.A = c.a2 * g / (2.0 * (1.0 - g) * (1.0 - g));
    c.beta = spec.market.r * (1.0 - g) - c.a2 * g / (2.0 * (1.0 - g));
    c.kelly = std::move(mpr.kelly);
    return c;
}

double exercise_utility(double x, const UtilityParams& utility) {
    return std::pow(x + utility.K, utility.gamma) / utility.gamma;
}

double trivial_value_stop(double x, const ProblemSpec& spec) {
    if (!(x >= 0.0)) throw Error(ErrorKind::Domain, "wealth must be nonnegative");
    if (classify_regime(spec) != Regime::StopImmediately)
        throw Error(ErrorKind::Config, "trivial_value_stop requires the stop-immediately regime");
    return exercise_utility(x, spec.utility);
}

}  // namespace stopvest
