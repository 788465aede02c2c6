#pragma once

#include "stopvest/free_boundary.hpp"
#include "stopvest/model.hpp"
#include "stopvest/montecarlo.hpp"
#include "stopvest/vi_solver.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stopvest {

enum class Mode { Solve, Verify, MC, All };

/// Throws Error(Config) on an unknown mode name.
Mode parse_mode(std::string_view name);
std::string_view to_string(Mode mode);

struct GridConfig {
    double y_min_factor = 1e-3;
    std::size_t M = 400;
    std::size_t N = 400;
};

struct MCRunConfig {
    MCConfig sim;
    double x0 = 2.0;
    double t0 = 0.0;
};

struct RunConfig {
    ProblemSpec problem;
    GridConfig grid;
    SolverConfig solver;
    MCRunConfig mc;
    std::string outputs = "out";
    Mode mode = Mode::All;

    /// Validates every field before any computation; throws Error.
    void validate() const;
};

/// Parses a JSON document with sections problem, grid, solver, mc and keys
/// outputs, mode. Omitted keys keep their defaults; unknown keys are
/// rejected. Does not validate values.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

enum class ExitCode : int { Ok = 0, CheckFailed = 1, Invalid = 2 };

struct RunOutcome {
    ExitCode code = ExitCode::Ok;
    Regime regime = Regime::FreeBoundary;
    std::vector<TheoremCheck> checks;
    std::optional<MCEstimate> mc;
    std::vector<std::string> files;  // written, relative to the output directory
    std::string notice;
};

/// Runs the configured mode and writes its artifacts under config.outputs.
/// Throws Error on invalid input and on numerical failure.
RunOutcome run(const RunConfig& config);

/// Front door used by the command-line tool: loads, applies overrides, runs,
/// and maps failures to exit codes with a message on `err`.
int run_command(std::string_view mode, const std::filesystem::path& config_path,
                const std::optional<std::string>& out_dir, const std::optional<std::uint64_t>& seed,
                std::ostream& log, std::ostream& err);

}  // namespace stopvest
