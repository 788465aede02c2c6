#include "fixtures.hpp"

#include "stopvest/error.hpp"
#include "stopvest/free_boundary.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace stopvest;

namespace {

const TheoremCheck& find(const std::vector<TheoremCheck>& checks, const std::string& name) {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw std::runtime_error("missing check " + name);
}

FreeBoundaryCurve curve_from(const std::vector<double>& h, const ProblemSpec& spec) {
    FreeBoundaryCurve c;
    for (std::size_t k = 0; k < h.size(); ++k) c.t.push_back(static_cast<double>(k) / static_cast<double>(h.size()));
    c.h = h;
    c.g = map_to_g(h, spec);
    c.first_contact.assign(h.size(), 0);
    return c;
}

}  // namespace

TEST_CASE("terminal boundary limits of the reference instance") {
    const auto spec = fixtures::p0();
    CHECK(hT_closed_form(spec) == doctest::Approx(std::pow(5.0 / 3.0, -0.5)).epsilon(1e-14));
    CHECK(hT_closed_form(spec) == doctest::Approx(0.7745967).epsilon(1e-7));
    CHECK(gT_closed_form(spec) == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
    CHECK(std::abs(gT_closed_form(spec) - map_to_g(hT_closed_form(spec), spec)) <= 1e-13);
}

TEST_CASE("terminal limit at the coincidence point equals y0") {
    // a2/(2(1-gamma)) - r(1-gamma)/gamma = r K at a2 = 0.1.
    CHECK(hT_closed_form(fixtures::with_a2(0.1)) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("terminal limits scale with K") {
    auto spec = fixtures::p0();
    const double h1 = hT_closed_form(spec), g1 = gT_closed_form(spec);
    spec.utility.K = 2.0;
    CHECK(hT_closed_form(spec) / h1 == doctest::Approx(std::pow(2.0, -0.5)).epsilon(1e-14));
    CHECK(gT_closed_form(spec) / g1 == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("terminal limit needs a positive denominator") {
    CHECK_THROWS_WITH_AS(hT_closed_form(fixtures::with_a2(0.05)), doctest::Contains("regime violation"), Error);
    CHECK_THROWS_AS(gT_closed_form(fixtures::with_a2(0.02)), Error);
}

TEST_CASE("dual to primal boundary map") {
    const auto spec = fixtures::p0();
    CHECK(map_to_g(1.0, spec) == 0.0);
    CHECK(map_to_g(0.7745966692414834, spec) == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
    CHECK(map_to_g(0.5, spec) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK_THROWS_AS(map_to_g(1.01, spec), Error);
    CHECK_THROWS_AS(map_to_g(0.0, spec), Error);
    CHECK_THROWS_AS(map_to_h(-1.0, spec), Error);
}

TEST_CASE("boundary map is a decreasing bijection") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uh(1e-3, 1.0), ug(0.05, 0.95);
    for (int i = 0; i < 1000; ++i) {
        auto spec = fixtures::p0();
        spec.utility.gamma = ug(rng);
        const double h = uh(rng);
        CHECK(std::abs(map_to_h(map_to_g(h, spec), spec) - h) <= 1e-12);
        CHECK(map_to_g(h, spec) > map_to_g(std::min(1.0, h * 1.01), spec));
    }
}

TEST_CASE("boundary of the reference solve") {
    const auto& sol = fixtures::p0_solution();
    const auto curve = extract_h(sol);
    const std::size_t N = sol.grid.N();
    REQUIRE(curve.h.size() == N);
    CHECK(curve.t.back() == sol.grid.t[N - 1]);
    for (std::size_t k = 0; k < N; ++k) {
        CHECK(curve.h[k] > sol.grid.y.front());
        CHECK(curve.h[k] <= sol.grid.y.back());
        const std::size_t f = curve.first_contact[k];
        CHECK(curve.h[k] >= sol.grid.y[f - 1]);
        CHECK(curve.h[k] <= sol.grid.y[f]);
        CHECK(curve.g[k] == doctest::Approx(std::pow(curve.h[k], -2.0) - 1.0).epsilon(1e-14));
    }
    CHECK(curve.h.front() >= curve.h.back());
    CHECK(extract_h_row(sol, N).degenerate);
}

TEST_CASE("theorem checks on the reference solve") {
    const auto& sol = fixtures::p0_solution();
    const auto checks = verify_theorems(extract_h(sol), sol.spec, sol.grid);
    REQUIRE(checks.size() == 4);
    for (const auto& c : checks) {
        INFO(c.name << " margin " << c.margin);
        CHECK(c.passed);
    }
    CHECK(find(checks, "h_terminal_limit").margin <= 2.0);
}

TEST_CASE("increasing boundary fails the monotonicity check at its location") {
    const auto& sol = fixtures::p0_solution();
    std::vector<double> h(50, 0.8);
    for (std::size_t k = 30; k < 50; ++k) h[k] = 0.9;
    const auto checks = verify_theorems(curve_from(h, sol.spec), sol.spec, sol.grid);
    const auto& a = find(checks, "h_nonincreasing");
    CHECK_FALSE(a.passed);
    CHECK(a.index == 30);
    CHECK_FALSE(find(checks, "g_nondecreasing").passed);
}

TEST_CASE("constant boundary at the limit passes") {
    const auto& sol = fixtures::p0_solution();
    const std::vector<double> h(50, hT_closed_form(sol.spec));
    const auto checks = verify_theorems(curve_from(h, sol.spec), sol.spec, sol.grid);
    CHECK(find(checks, "h_nonincreasing").passed);
    CHECK(find(checks, "h_terminal_limit").passed);
    CHECK(find(checks, "h_lower_bound").passed);
}

TEST_CASE("boundary below the lower bound fails") {
    const auto& sol = fixtures::p0_solution();
    const std::vector<double> h(50, 0.6);
    const auto checks = verify_theorems(curve_from(h, sol.spec), sol.spec, sol.grid);
    CHECK_FALSE(find(checks, "h_lower_bound").passed);
    CHECK_FALSE(find(checks, "h_terminal_limit").passed);
}

TEST_CASE("malformed contact sets are rejected") {
    auto sol = fixtures::p0_solution();
    const std::size_t cols = sol.cols();
    std::fill(sol.contact.begin(), sol.contact.begin() + static_cast<std::ptrdiff_t>(cols), 0);
    CHECK_THROWS_WITH_AS(extract_h_row(sol, 0), doctest::Contains("no exercise region at t"), Error);
    sol.contact[cols - 1] = 1;
    sol.contact[cols - 10] = 1;
    CHECK_THROWS_WITH_AS(extract_h_row(sol, 0), doctest::Contains("contact set not connected"), Error);
    std::fill(sol.contact.begin(), sol.contact.begin() + static_cast<std::ptrdiff_t>(cols), 1);
    const auto p = extract_h_row(sol, 0);
    CHECK(p.degenerate);
    CHECK(p.h == sol.grid.y.front());
}

TEST_CASE("local cell width") {
    const auto g = DualGrid::uniform(0.1, 1.0, 10, 1.0, 1);
    CHECK(local_cell_width(g, g.y[3]) == doctest::Approx(g.y[4] - g.y[3]));
    CHECK(local_cell_width(g, 0.5 * (g.y[3] + g.y[4])) == doctest::Approx(g.y[4] - g.y[3]));
    CHECK(local_cell_width(g, 1.0) == doctest::Approx(g.y[10] - g.y[9]));
}
