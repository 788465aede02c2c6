#include "fixtures.hpp"

#include "stopvest/dual_space.hpp"
#include "stopvest/error.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace stopvest;

namespace {

const UtilityParams kUtil{0.5, 1.0};

struct Table {
    std::vector<double> x, V;
};

Table terminal_table(double x_max, std::size_t n) {
    Table t;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = x_max * static_cast<double>(i) / static_cast<double>(n - 1);
        t.x.push_back(x);
        t.V.push_back(exercise_utility(x, kUtil));
    }
    return t;
}

}  // namespace

TEST_CASE("obstacle values") {
    CHECK(phi(1.0, kUtil) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(phi(0.5, kUtil) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(phi(0.774597, kUtil) == doctest::Approx(2.065591).epsilon(1e-6));
    CHECK_THROWS_AS(phi(0.0, kUtil), Error);
    CHECK_THROWS_AS(Obstacle(kUtil).d1(-1.0), Error);
    CHECK_THROWS_AS(Obstacle(kUtil).d2(0.0), Error);
}

TEST_CASE("boundary value equals the obstacle at y0") {
    CHECK(dual_boundary_value(kUtil) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(dual_boundary_value({0.5, 4.0}) == doctest::Approx(4.0).epsilon(1e-15));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ug(0.05, 0.95), uk(0.1, 10.0);
    for (int i = 0; i < 20; ++i) {
        const UtilityParams u{ug(rng), uk(rng)};
        const double y0 = std::pow(u.K, u.gamma - 1.0);
        CHECK(std::abs(phi(y0, u) - dual_boundary_value(u)) <= 1e-14 * dual_boundary_value(u));
    }
}

TEST_CASE("dual domain") {
    auto spec = fixtures::p0();
    const auto d = make_dual_domain(spec);
    CHECK(d.y0 == 1.0);
    CHECK(d.y_min == doctest::Approx(1e-3));
    spec.utility.K = 4.0;
    CHECK(make_dual_domain(spec).y0 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(make_dual_domain(spec, 0.2), Error);
    CHECK_THROWS_AS(make_dual_domain(spec, 0.0), Error);
}

TEST_CASE("obstacle is strictly convex") {
    const Obstacle ob(kUtil);
    const auto g = DualGrid::uniform(1e-3, 1.0, 400, 1.0, 1);
    for (std::size_t j = 1; j + 1 < g.y.size(); ++j) {
        const double hl = g.y[j] - g.y[j - 1], hr = g.y[j + 1] - g.y[j];
        const double d2 = ((ob.value(g.y[j + 1]) - ob.value(g.y[j])) / hr - (ob.value(g.y[j]) - ob.value(g.y[j - 1])) / hl);
        CHECK(d2 > 0.0);
    }
}

TEST_CASE("obstacle derivatives match finite differences to second order") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ug(0.1, 0.9), uy(0.05, 1.0);
    for (int i = 0; i < 50; ++i) {
        const Obstacle ob({ug(rng), 1.0});
        const double y = uy(rng);
        double prev1 = 0.0, prev2 = 0.0;
        for (double h : {1e-3, 5e-4}) {
            const double e1 = std::abs((ob.value(y + h) - ob.value(y - h)) / (2.0 * h) - ob.d1(y));
            const double e2 = std::abs((ob.value(y + h) - 2.0 * ob.value(y) + ob.value(y - h)) / (h * h) - ob.d2(y));
            if (prev1 > 1e-9) CHECK(prev1 / e1 > 3.0);
            if (prev2 > 1e-6) CHECK(prev2 / e2 > 3.0);
            prev1 = e1;
            prev2 = e2;
        }
    }
}

TEST_CASE("wealth map of the obstacle is decreasing and vanishes at y0") {
    const Obstacle ob(kUtil);
    double prev = std::numeric_limits<double>::infinity();
    for (double y = 0.01; y < 1.0; y += 0.01) {
        const double x = -ob.d1(y);
        CHECK(x > 0.0);
        CHECK(x < prev);
        prev = x;
    }
    CHECK(-ob.d1(1.0) == 0.0);
}

TEST_CASE("Legendre transform of the terminal utility") {
    const auto t = terminal_table(50.0, 5001);
    CHECK(legendre_transform(t.x, t.V, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(legendre_transform(t.x, t.V, 0.5) == doctest::Approx(2.5).epsilon(1e-8));
}

TEST_CASE("Legendre transform reproduces the obstacle") {
    // Table on the wealth images of a fine log grid in y.
    const auto g = DualGrid::uniform(0.05, 1.0, 2000, 1.0, 1);
    const Obstacle ob(kUtil);
    std::vector<double> x, V;
    for (auto it = g.y.rbegin(); it != g.y.rend(); ++it) {
        x.push_back(-ob.d1(*it));
        V.push_back(exercise_utility(x.back(), kUtil));
    }
    for (double y = 0.1; y <= 1.0; y += 0.01) {
        const double v = legendre_transform(x, V, y);
        CHECK(std::abs(v - ob.value(y)) <= 1e-6 * ob.value(y));
    }
}

TEST_CASE("Legendre transform rejects bad tables") {
    std::vector<double> x{0.0, 1.0, 2.0, 3.0}, lin{0.0, 1.0, 2.0, 3.0};
    CHECK_THROWS_WITH_AS(legendre_transform(x, lin, 1.0), "concavity violated", Error);
    const auto t = terminal_table(50.0, 501);
    CHECK_THROWS_WITH_AS(legendre_transform(t.x, t.V, 2.0), "extrapolation refused", Error);
    CHECK_THROWS_WITH_AS(legendre_transform(t.x, t.V, 0.01), "extrapolation refused", Error);
    std::vector<double> unsorted{0.0, 2.0, 1.0};
    CHECK_THROWS_AS(legendre_transform(unsorted, std::vector<double>{0.0, 1.0, 1.5}, 0.5), Error);
}

TEST_CASE("dual-constraint residual") {
    CHECK(std::abs(constraint_residual(2.5, -3.0, 0.5, kUtil)) <= 1e-15);
    CHECK(constraint_residual(3.0, -3.0, 0.5, kUtil) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(constraint_residual(2.0, 0.0, 0.5, kUtil)) <= 1e-15);
    CHECK_THROWS_WITH_AS(constraint_residual(2.0, 1.0, 0.5, kUtil), "constraint term undefined", Error);
}

TEST_CASE("marginal-utility gap") {
    CHECK(std::abs(marginal_utility_gap(-3.0, 0.5, kUtil)) <= 1e-15);
    CHECK(marginal_utility_gap(-4.0, 0.5, kUtil) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(marginal_utility_gap(0.0, 1.0, kUtil) == 0.0);
}
