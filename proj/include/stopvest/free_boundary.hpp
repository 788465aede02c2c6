#pragma once

#include "stopvest/vi_solver.hpp"

#include <string>
#include <vector>

namespace stopvest {

struct BoundaryPoint {
    double h = 0.0;
    std::size_t first_contact = 0;  // smallest grid index in contact
    bool degenerate = false;        // whole row in contact; h is the left grid node
};

/// Dual stopping boundary on row k: the smallest contact node, refined inside
/// the transition cell. The gap u - phi vanishes quadratically at the
/// boundary, so its square root is extrapolated linearly from the two
/// continuation nodes left of the cell.
BoundaryPoint extract_h_row(const DualSolution& sol, std::size_t k);

/// Stopping boundary over t_0 .. t_{N-1}. The terminal row is excluded: it
/// equals phi identically and h(T) exists only as a limit.
struct FreeBoundaryCurve {
    std::vector<double> t;
    std::vector<double> h;  // dual, marginal-utility units
    std::vector<double> g;  // primal, wealth units
    std::vector<std::size_t> first_contact;
};

FreeBoundaryCurve extract_h(const DualSolution& sol);

double hT_closed_form(const ProblemSpec& spec);
double gT_closed_form(const ProblemSpec& spec);

/// g = h^(1/(gamma-1)) - K.
double map_to_g(double h, const ProblemSpec& spec);
std::vector<double> map_to_g(const std::vector<double>& h, const ProblemSpec& spec);
/// Inverse of map_to_g: h = (g + K)^(gamma-1).
double map_to_h(double g, const ProblemSpec& spec);

struct TheoremCheck {
    std::string name;
    bool passed = false;
    double margin = 0.0;      // worst measured violation (<= tolerance passes)
    double tolerance = 0.0;
    std::ptrdiff_t index = -1;  // time index of the worst case
};

/// (a) h nonincreasing, (b) g nondecreasing, both within one cell; (c) h at
/// t_{N-1} within two cells of the closed-form limit; (d) h above the
/// closed-form lower bound within one cell.
std::vector<TheoremCheck> verify_theorems(const FreeBoundaryCurve& curve, const ProblemSpec& spec,
                                          const DualGrid& grid);

/// Width of the y cell containing `y` (the right neighbour cell at a node).
double local_cell_width(const DualGrid& grid, double y);

}  // namespace stopvest
