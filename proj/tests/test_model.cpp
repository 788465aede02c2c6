#include "fixtures.hpp"

#include "stopvest/error.hpp"
#include "stopvest/model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace stopvest;

namespace {

// Dense Gauss-Jordan inverse with partial pivoting.
Eigen::MatrixXd gauss_jordan_inverse(Eigen::MatrixXd a) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);
    for (int c = 0; c < n; ++c) {
        int p = c;
        for (int i = c + 1; i < n; ++i)
            if (std::abs(a(i, c)) > std::abs(a(p, c))) p = i;
        a.row(c).swap(a.row(p));
        inv.row(c).swap(inv.row(p));
        const double d = a(c, c);
        a.row(c) /= d;
        inv.row(c) /= d;
        for (int i = 0; i < n; ++i) {
            if (i == c) continue;
            const double f = a(i, c);
            a.row(i) -= f * a.row(c);
            inv.row(i) -= f * inv.row(c);
        }
    }
    return inv;
}

}  // namespace

TEST_CASE("a2 of the reference scalar market") {
    const auto m = compute_a2(Eigen::VectorXd::Constant(1, 0.12), Eigen::MatrixXd::Constant(1, 1, 0.18));
    CHECK(m.a2 == doctest::Approx(0.08).epsilon(1e-15));
    CHECK(m.kelly(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("a2 with identity covariance is a sum of squares") {
    Eigen::VectorXd mu(2);
    mu << 0.1, 0.2;
    CHECK(compute_a2(mu, Eigen::MatrixXd::Identity(2, 2)).a2 == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("a2 vanishes without excess return") {
    std::mt19937_64 rng(7);
    const auto S = fixtures::random_spd(rng, 2);
    const auto m = compute_a2(Eigen::VectorXd::Zero(2), S);
    CHECK(m.a2 == 0.0);
    CHECK(m.kelly.norm() == 0.0);
}

TEST_CASE("a2 agrees with an explicit inverse on random SPD matrices") {
    std::mt19937_64 rng(20240501);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 4;
        const auto S = fixtures::random_spd(rng, n);
        Eigen::VectorXd mu(n);
        for (int i = 0; i < n; ++i) mu(i) = u(rng);
        const double want = mu.dot(gauss_jordan_inverse(S) * mu);
        const double got = compute_a2(mu, S).a2;
        CHECK(std::abs(got - want) <= 1e-12 * std::abs(want));
    }
}

TEST_CASE("compute_a2 rejects degenerate and mismatched inputs") {
    Eigen::MatrixXd singular(2, 2);
    singular << 1.0, 1.0, 1.0, 1.0;
    CHECK_THROWS_WITH_AS(compute_a2(Eigen::VectorXd::Ones(2), singular), doctest::Contains("degenerate covariance"), Error);
    Eigen::MatrixXd indefinite(2, 2);
    indefinite << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_WITH_AS(compute_a2(Eigen::VectorXd::Ones(2), indefinite), doctest::Contains("degenerate covariance"), Error);
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, 0.0, 1.0;
    CHECK_THROWS_WITH_AS(compute_a2(Eigen::VectorXd::Ones(2), asym), doctest::Contains("degenerate covariance"), Error);
    CHECK_THROWS_WITH_AS(compute_a2(Eigen::VectorXd::Ones(3), Eigen::MatrixXd::Identity(2, 2)), doctest::Contains("shape error"), Error);
}

TEST_CASE("covariance from volatility rows") {
    Eigen::MatrixXd sigma(2, 2);
    sigma << 0.2, 0.0, 0.1, 0.3;
    const auto m = MarketParams::from_volatility(0.05, Eigen::VectorXd::Ones(2), sigma);
    CHECK((m.Sigma - sigma.transpose() * sigma).norm() == 0.0);
    CHECK(m.Sigma(0, 1) == m.Sigma(1, 0));
}

TEST_CASE("regime specimens") {
    CHECK(classify_regime(0.02, 0.5, 0.05) == Regime::StopImmediately);
    CHECK(classify_regime(0.12, 0.5, 0.05) == Regime::NeverStop);
    CHECK(classify_regime(0.08, 0.5, 0.05) == Regime::FreeBoundary);
    CHECK(classify_regime(fixtures::p0()) == Regime::FreeBoundary);
}

TEST_CASE("regime ties belong to the closed inequalities") {
    // c = a2/2 - 0.05 at gamma = 0.5; both ties are exact in binary.
    CHECK(classify_regime(0.1, 0.5, 0.05) == Regime::NeverStop);
    CHECK(classify_regime(0.05, 0.5, 0.05) == Regime::StopImmediately);
    CHECK(classify_regime(0.0, 0.5, 0.05) == Regime::StopImmediately);
}

TEST_CASE("regime partition follows the sign of c") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ua(0.0, 0.5), ug(0.01, 0.99), ur(0.001, 0.2);
    for (int i = 0; i < 10000; ++i) {
        const double a2 = ua(rng), g = ug(rng), r = ur(rng);
        const double c = a2 * g / (2.0 * (1.0 - g)) - r;
        const Regime want = c <= -r * g ? Regime::StopImmediately : (c >= 0.0 ? Regime::NeverStop : Regime::FreeBoundary);
        CHECK(classify_regime(a2, g, r) == want);
    }
}

TEST_CASE("derived constants of the reference instance") {
    const auto c = derived_constants(fixtures::p0());
    CHECK(c.a2 == doctest::Approx(0.08).epsilon(1e-15));
    CHECK(c.A == doctest::Approx(0.08).epsilon(1e-14));
    CHECK(c.beta == doctest::Approx(-0.015).epsilon(1e-13));
}

TEST_CASE("derived constants without market price of risk") {
    auto spec = fixtures::p0();
    spec.market.mu.setZero();
    const auto c = derived_constants(spec);
    CHECK(c.A == 0.0);
    CHECK(c.beta == doctest::Approx(0.05 * 0.5).epsilon(1e-15));
}

TEST_CASE("growth and Merton exponents are linked") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ug(0.05, 0.95), ur(0.01, 0.1), uf(0.01, 0.99);
    int tested = 0;
    while (tested < 500) {
        const double g = ug(rng), r = ur(rng);
        // a2 inside the free-boundary band: a2 g / (2 (1-g)) in (r (1-g), r).
        const double lo = 2.0 * (1.0 - g) * r * (1.0 - g) / g, hi = 2.0 * (1.0 - g) * r / g;
        const double a2 = lo + uf(rng) * (hi - lo);
        const auto spec = fixtures::with_a2(a2, g, r);
        if (classify_regime(spec) != Regime::FreeBoundary) continue;
        const auto c = derived_constants(spec);
        CHECK(std::abs((c.A - r) + c.beta / (1.0 - g)) <= 1e-14);
        ++tested;
    }
}

TEST_CASE("stop-immediately value") {
    const auto spec = fixtures::scalar_spec(0.05, 0.1, 0.5);  // a2 = 0.02
    REQUIRE(classify_regime(spec) == Regime::StopImmediately);
    CHECK(trivial_value_stop(0.0, spec) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(trivial_value_stop(3.0, spec) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(trivial_value_stop(8.0, spec) == doctest::Approx(6.0).epsilon(1e-15));
    CHECK_THROWS_AS(trivial_value_stop(-1.0, spec), Error);
    CHECK_THROWS_AS(trivial_value_stop(1.0, fixtures::p0()), Error);
}

TEST_CASE("spec validation") {
    auto spec = fixtures::p0();
    CHECK_NOTHROW(spec.validate());
    auto bad = spec;
    bad.utility.gamma = 1.5;
    CHECK_THROWS_WITH_AS(bad.validate(), "gamma out of (0,1)", Error);
    bad = spec;
    bad.utility.gamma = 0.0;
    CHECK_THROWS_WITH_AS(bad.validate(), "gamma out of (0,1)", Error);
    bad = spec;
    bad.utility.K = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = spec;
    bad.market.r = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = spec;
    bad.T = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = spec;
    bad.market.Sigma = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("shape error"), Error);
}

TEST_CASE("exercise utility") {
    CHECK(exercise_utility(3.0, {0.5, 1.0}) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(exercise_utility(0.0, {0.5, 4.0}) == doctest::Approx(4.0).epsilon(1e-15));
}
