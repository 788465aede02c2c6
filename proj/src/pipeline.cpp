#include "stopvest/pipeline.hpp"

#include "stopvest/checks.hpp"
#include "stopvest/dual_space.hpp"
#include "stopvest/error.hpp"
#include "stopvest/primal.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <type_traits>

namespace stopvest {

using json = nlohmann::ordered_json;

Mode parse_mode(std::string_view name) {
    if (name == "solve") return Mode::Solve;
    if (name == "verify") return Mode::Verify;
    if (name == "mc") return Mode::MC;
    if (name == "all") return Mode::All;
    throw Error(ErrorKind::Config, "unknown mode '" + std::string(name) + "' (expected solve, verify, mc or all)");
}

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::Solve: return "solve";
        case Mode::Verify: return "verify";
        case Mode::MC: return "mc";
        case Mode::All: return "all";
    }
    return "all";
}

void RunConfig::validate() const {
    problem.validate();
    if (grid.M < 50 || grid.N < 50) throw Error(ErrorKind::Config, "grid: M and N must be at least 50");
    make_dual_domain(problem, grid.y_min_factor);
    solver.validate();
    mc.sim.validate(problem.T);
    if (!(mc.x0 >= 0.0)) throw Error(ErrorKind::Config, "mc: x0 must be nonnegative");
    if (!(mc.t0 >= 0.0 && mc.t0 < problem.T)) throw Error(ErrorKind::Config, "mc: t0 must lie in [0, T)");
    if (outputs.empty()) throw Error(ErrorKind::Config, "outputs: empty directory path");
}

namespace {

[[noreturn]] void bad(const std::string& key, const char* what) {
    throw Error(ErrorKind::Config, "config: '" + key + "' " + what);
}

// Reads keys of one JSON object and rejects the ones nobody asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) bad(path_.empty() ? "<root>" : path_, "must be an object");
    }

    const json* find(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void get(const char* key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) bad(name(key), "must be a number");
            out = v->get<double>();
        }
    }

    template <class U>
        requires(std::is_unsigned_v<U> && !std::is_same_v<U, bool>)
    void get(const char* key, U& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) bad(name(key), "must be a nonnegative integer");
            out = v->get<U>();
        }
    }

    void get(const char* key, int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) bad(name(key), "must be an integer");
            out = v->get<int>();
        }
    }

    void get(const char* key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) bad(name(key), "must be true or false");
            out = v->get<bool>();
        }
    }

    void get(const char* key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) bad(name(key), "must be a string");
            out = v->get<std::string>();
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw Error(ErrorKind::Config, "config: unknown key '" + name(it.key().c_str()) + "'");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Eigen::VectorXd read_vector(const json& v, const std::string& key) {
    if (!v.is_array() || v.empty()) bad(key, "must be a nonempty array of numbers");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) bad(key, "must be a nonempty array of numbers");
        out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
}

Eigen::MatrixXd read_matrix(const json& v, const std::string& key) {
    if (!v.is_array() || v.empty()) bad(key, "must be a nonempty array of rows");
    const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_array() || v[i].size() != cols || cols == 0) bad(key, "must be a rectangular array of rows");
        for (std::size_t j = 0; j < cols; ++j) {
            if (!v[i][j].is_number()) bad(key, "entries must be numbers");
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j].get<double>();
        }
    }
    return out;
}

void read_problem(const json& j, ProblemSpec& p) {
    Section s(j, "problem");
    const json* r = s.find("r");
    if (!r) bad("problem.r", "is required");
    if (!r->is_number()) bad("problem.r", "must be a number");
    p.market.r = r->get<double>();
    const json* mu = s.find("mu");
    if (!mu) bad("problem.mu", "is required");
    p.market.mu = read_vector(*mu, "problem.mu");
    const json* cov = s.find("Sigma");
    const json* vol = s.find("sigma");
    if ((cov != nullptr) == (vol != nullptr)) bad("problem", "needs exactly one of Sigma (covariance) or sigma (volatility)");
    if (cov) {
        p.market.Sigma = read_matrix(*cov, "problem.Sigma");
    } else {
        const Eigen::MatrixXd sigma = read_matrix(*vol, "problem.sigma");
        if (sigma.cols() != p.market.mu.size()) throw Error(ErrorKind::Shape, "shape error: sigma columns must match mu");
        p.market = MarketParams::from_volatility(p.market.r, p.market.mu, sigma);
    }
    s.get("gamma", p.utility.gamma);
    s.get("K", p.utility.K);
    s.get("T", p.T);
    s.finish();
}

json matrix_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(row);
    }
    return out;
}

json config_json(const RunConfig& c) {
    json mu = json::array();
    for (Eigen::Index i = 0; i < c.problem.market.mu.size(); ++i) mu.push_back(c.problem.market.mu(i));
    json j;
    j["mode"] = std::string(to_string(c.mode));
    j["outputs"] = c.outputs;
    j["problem"] = {{"r", c.problem.market.r}, {"mu", mu}, {"Sigma", matrix_json(c.problem.market.Sigma)},
                    {"gamma", c.problem.utility.gamma}, {"K", c.problem.utility.K}, {"T", c.problem.T}};
    j["grid"] = {{"y_min_factor", c.grid.y_min_factor}, {"M", c.grid.M}, {"N", c.grid.N}};
    j["solver"] = {{"theta", c.solver.theta},         {"rannacher_steps", c.solver.rannacher_steps},
                   {"psor_omega", c.solver.psor_omega}, {"psor_tol", c.solver.psor_tol},
                   {"psor_max_iter", c.solver.psor_max_iter}, {"contact_tol", c.solver.contact_tol}};
    j["mc"] = {{"n_paths", c.mc.sim.n_paths}, {"dt_sim", c.mc.sim.dt_sim}, {"seed", c.mc.sim.seed},
               {"antithetic", c.mc.sim.antithetic}, {"x0", c.mc.x0}, {"t0", c.mc.t0}};
    return j;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
    return buf;
}

// JSON with every floating-point number at 17 significant digits.
void write_json(std::ostream& os, const json& j, int indent = 0) {
    const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
    const std::string close(static_cast<std::size_t>(indent), ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                os << "{}";
                break;
            }
            os << "{\n";
            std::size_t i = 0;
            for (auto it = j.begin(); it != j.end(); ++it, ++i) {
                os << pad << json(it.key()).dump() << ": ";
                write_json(os, it.value(), indent + 2);
                os << (i + 1 < j.size() ? ",\n" : "\n");
            }
            os << close << "}";
            break;
        }
        case json::value_t::array: {
            if (j.empty()) {
                os << "[]";
                break;
            }
            os << "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                os << pad;
                write_json(os, j[i], indent + 2);
                os << (i + 1 < j.size() ? ",\n" : "\n");
            }
            os << close << "]";
            break;
        }
        case json::value_t::number_float: {
            const double v = j.get<double>();
            if (std::isfinite(v))
                os << num(v);
            else
                os << "null";
            break;
        }
        default:
            os << j.dump();
    }
}

class Artifacts {
public:
    Artifacts(std::filesystem::path dir, RunOutcome& outcome) : dir_(std::move(dir)), outcome_(outcome) {
        std::filesystem::create_directories(dir_);
    }

    std::ofstream open(const std::string& name) {
        std::ofstream f(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(ErrorKind::Config, "cannot write " + (dir_ / name).string());
        outcome_.files.push_back(name);
        return f;
    }

    void json_file(const std::string& name, const json& j) {
        auto f = open(name);
        write_json(f, j);
        f << "\n";
    }

    void text_file(const std::string& name, const std::string& text) { open(name) << text << "\n"; }

private:
    std::filesystem::path dir_;
    RunOutcome& outcome_;
};

void write_boundary(Artifacts& out, const FreeBoundaryCurve& curve, const ProblemSpec& spec) {
    auto f = out.open("boundary.csv");
    const std::string hT = num(hT_closed_form(spec));
    const std::string gT = num(gT_closed_form(spec));
    f << "t,h,g,hT_closed_form,gT_closed_form\n";
    for (std::size_t k = 0; k < curve.t.size(); ++k)
        f << num(curve.t[k]) << ',' << num(curve.h[k]) << ',' << num(curve.g[k]) << ',' << hT << ',' << gT << '\n';
}

void write_surface(Artifacts& out, const DualSolution& sol) {
    auto f = out.open("surface.csv");
    f << "t,y,u,phi,contact\n";
    for (std::size_t k = 0; k < sol.rows(); ++k) {
        const std::string t = num(sol.grid.t[k]);
        const auto u = sol.row(k);
        const auto c = sol.contact_row(k);
        for (std::size_t j = 0; j < u.size(); ++j)
            f << t << ',' << num(sol.grid.y[j]) << ',' << num(u[j]) << ',' << num(sol.phi[j]) << ','
              << (c[j] ? 1 : 0) << '\n';
    }
}

void slices_header(std::ostream& f, std::size_t assets) {
    f << "t,x,V";
    for (std::size_t i = 1; i <= assets; ++i) f << ",pi_" << i;
    f << ",in_exercise\n";
}

void write_slices(Artifacts& out, const PolicySurface& surface) {
    auto f = out.open("slices.csv");
    const auto& kelly = surface.constants().kelly;
    slices_header(f, static_cast<std::size_t>(kelly.size()));
    for (const auto& s : surface.slices()) {
        const std::string t = num(s.t);
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            f << t << ',' << num(s.x[i]) << ',' << num(s.V[i]);
            for (Eigen::Index a = 0; a < kelly.size(); ++a) f << ',' << num(kelly(a) * s.pi_scale[i]);
            f << ',' << (s.in_exercise[i] ? 1 : 0) << '\n';
        }
    }
}

json mc_json(const RunConfig& c, const MCEstimate& est, double pde, double abs_diff, bool passed) {
    return {{"x0", c.mc.x0},        {"t0", c.mc.t0},           {"mean", est.mean},
            {"stderr", est.std_err}, {"n_paths", est.n_paths}, {"dt_sim", c.mc.sim.dt_sim},
            {"pde_value", pde},     {"abs_diff", abs_diff},    {"passed", passed}};
}

json report_json(const RunConfig& c, const RunOutcome& outcome) {
    json checks = json::array();
    for (const auto& ch : outcome.checks)
        checks.push_back({{"check_name", ch.name}, {"passed", ch.passed}, {"margin", ch.margin}, {"tolerance", ch.tolerance}});
    json j;
    j["regime"] = std::string(to_string(outcome.regime));
    if (!outcome.notice.empty()) j["notice"] = outcome.notice;
    j["checks"] = checks;
    j["config"] = config_json(c);
    return j;
}

bool writes_solution(Mode m) { return m != Mode::MC; }
bool runs_checks(Mode m) { return m == Mode::Verify || m == Mode::All; }
bool runs_mc(Mode m) { return m == Mode::MC || m == Mode::All; }

// Monte Carlo against the reconstructed surface, recorded as one more check.
void run_mc(const RunConfig& c, const PolicySurface& surface, Artifacts& out, RunOutcome& outcome) {
    const double pde = surface.value_at(c.mc.x0, c.mc.t0);
    const auto est = simulate_value(surface, c.mc.x0, c.mc.t0, c.problem, c.mc.sim);
    const double diff = std::abs(est.mean - pde);
    const double tol = 3.0 * est.std_err + 0.01 * std::abs(pde);
    const bool passed = diff <= tol;
    outcome.mc = est;
    outcome.checks.push_back({"mc_cross_validation", passed, diff, tol, -1});
    out.json_file("mc.json", mc_json(c, est, pde, diff, passed));
}

void run_free_boundary(const RunConfig& c, Artifacts& out, RunOutcome& outcome) {
    const auto grid = build_grid(make_dual_domain(c.problem, c.grid.y_min_factor), c.grid.M, c.grid.N);
    const auto sol = solve_dual_vi(c.problem, grid, c.solver);
    const auto surface = PolicySurface::build(sol);
    if (writes_solution(c.mode)) {
        write_boundary(out, surface.boundary(), c.problem);
        write_surface(out, sol);
        write_slices(out, surface);
    }
    if (runs_checks(c.mode)) outcome.checks = all_solution_checks(sol, surface.boundary(), surface);
    if (runs_mc(c.mode)) run_mc(c, surface, out, outcome);
}

void run_never_stop(const RunConfig& c, Artifacts& out, RunOutcome& outcome) {
    outcome.notice = "regime never-stop: no free boundary; obstacle-free linear solve";
    const auto grid = build_grid(make_dual_domain(c.problem, c.grid.y_min_factor), c.grid.M, c.grid.N);
    const auto sol = solve_dual_linear(c.problem, grid, c.solver);
    const auto surface = PolicySurface::build(sol);
    if (writes_solution(c.mode)) {
        write_surface(out, sol);
        write_slices(out, surface);
    }
    if (runs_mc(c.mode)) run_mc(c, surface, out, outcome);
}

void run_stop_immediately(const RunConfig& c, Artifacts& out, RunOutcome& outcome) {
    outcome.notice = "regime stop-immediately: stopping at once is optimal, V(x,t) = (x+K)^gamma/gamma";
    const auto& util = c.problem.utility;
    const auto grid = build_grid(make_dual_domain(c.problem, c.grid.y_min_factor), c.grid.M, c.grid.N);
    const Obstacle ob(util);
    if (writes_solution(c.mode)) {
        auto f = out.open("surface.csv");
        f << "t,y,u,phi,contact\n";
        for (double t : grid.t)
            for (double y : grid.y) f << num(t) << ',' << num(y) << ',' << num(ob.value(y)) << ',' << num(ob.value(y)) << ",1\n";
        auto s = out.open("slices.csv");
        slices_header(s, c.problem.market.assets());
        for (double t : grid.t) {
            for (auto it = grid.y.rbegin(); it != grid.y.rend(); ++it) {
                const double x = -ob.d1(*it);
                s << num(t) << ',' << num(x) << ',' << num(exercise_utility(x, util));
                for (std::size_t a = 0; a < c.problem.market.assets(); ++a) s << ",0";
                s << ",1\n";
            }
        }
    }
    if (runs_mc(c.mode)) {
        MCEstimate est;
        est.mean = trivial_value_stop(c.mc.x0, c.problem);
        est.n_paths = c.mc.sim.n_paths;
        est.n_stopped_early = c.mc.sim.n_paths;
        est.mean_tau = c.mc.t0;
        est.started_in_exercise = true;
        outcome.mc = est;
        out.json_file("mc.json", mc_json(c, est, est.mean, 0.0, true));
    }
}

}  // namespace

RunConfig parse_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Config, std::string("config: invalid JSON: ") + e.what());
    }
    RunConfig c;
    Section root(j, "");
    const json* problem = root.find("problem");
    if (!problem) bad("problem", "is required");
    read_problem(*problem, c.problem);
    if (const json* g = root.find("grid")) {
        Section s(*g, "grid");
        s.get("y_min_factor", c.grid.y_min_factor);
        s.get("M", c.grid.M);
        s.get("N", c.grid.N);
        s.finish();
    }
    if (const json* sv = root.find("solver")) {
        Section s(*sv, "solver");
        s.get("theta", c.solver.theta);
        s.get("rannacher_steps", c.solver.rannacher_steps);
        s.get("psor_omega", c.solver.psor_omega);
        s.get("psor_tol", c.solver.psor_tol);
        s.get("psor_max_iter", c.solver.psor_max_iter);
        c.solver.contact_tol = SolverConfig::defaults_for(c.solver.psor_tol).contact_tol;
        s.get("contact_tol", c.solver.contact_tol);
        s.finish();
    }
    if (const json* m = root.find("mc")) {
        Section s(*m, "mc");
        s.get("n_paths", c.mc.sim.n_paths);
        s.get("dt_sim", c.mc.sim.dt_sim);
        s.get("seed", c.mc.sim.seed);
        s.get("antithetic", c.mc.sim.antithetic);
        s.get("x0", c.mc.x0);
        s.get("t0", c.mc.t0);
        s.finish();
    }
    root.get("outputs", c.outputs);
    std::string mode(to_string(c.mode));
    root.get("mode", mode);
    c.mode = parse_mode(mode);
    root.finish();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Config, "cannot read config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

RunOutcome run(const RunConfig& config) {
    config.validate();
    RunOutcome outcome;
    outcome.regime = classify_regime(config.problem);
    Artifacts out(config.outputs, outcome);
    switch (outcome.regime) {
        case Regime::FreeBoundary: run_free_boundary(config, out, outcome); break;
        case Regime::NeverStop: run_never_stop(config, out, outcome); break;
        case Regime::StopImmediately: run_stop_immediately(config, out, outcome); break;
    }
    if (!outcome.notice.empty()) out.text_file("notice.txt", outcome.notice);
    if (runs_checks(config.mode)) out.json_file("report.json", report_json(config, outcome));

    bool ok = true;
    for (const auto& ch : outcome.checks) ok = ok && ch.passed;
    outcome.code = ok ? ExitCode::Ok : ExitCode::CheckFailed;
    return outcome;
}

int run_command(std::string_view mode, const std::filesystem::path& config_path,
                const std::optional<std::string>& out_dir, const std::optional<std::uint64_t>& seed,
                std::ostream& log, std::ostream& err) {
    try {
        RunConfig config = load_config(config_path);
        config.mode = parse_mode(mode);
        if (out_dir) config.outputs = *out_dir;
        if (seed) config.mc.sim.seed = *seed;
        const auto outcome = run(config);
        log << "regime " << to_string(outcome.regime) << "\n";
        if (!outcome.notice.empty()) log << outcome.notice << "\n";
        for (const auto& ch : outcome.checks)
            log << (ch.passed ? "PASS " : "FAIL ") << ch.name << " margin=" << num(ch.margin)
                << " tolerance=" << num(ch.tolerance) << "\n";
        if (outcome.mc)
            log << "mc mean=" << num(outcome.mc->mean) << " stderr=" << num(outcome.mc->std_err) << "\n";
        for (const auto& f : outcome.files) log << "wrote " << (std::filesystem::path(config.outputs) / f).string() << "\n";
        return static_cast<int>(outcome.code);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        const bool numeric = e.kind() == ErrorKind::Numeric || e.kind() == ErrorKind::Reconstruction;
        return static_cast<int>(numeric ? ExitCode::CheckFailed : ExitCode::Invalid);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Invalid);
    }
}

}  // namespace stopvest
