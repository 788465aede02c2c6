#include "stopvest/montecarlo.hpp"

#include "stopvest/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace stopvest {

void MCConfig::validate(double T) const {
    if (n_paths < 1000) throw Error(ErrorKind::Config, "n_paths must be at least 1000");
    if (antithetic && n_paths % 2 != 0) throw Error(ErrorKind::Config, "antithetic sampling needs an even n_paths");
    if (!(dt_sim > 0.0 && dt_sim <= T / 100.0)) throw Error(ErrorKind::Config, "dt_sim must lie in (0, T/100]");
}

SurfacePolicy::SurfacePolicy(const PolicySurface& surface, double pi_multiplier, StopRule rule)
    : surface_(surface),
      multiplier_(pi_multiplier),
      rule_(rule),
      a2_(surface.constants().a2),
      kelly_norm_(surface.constants().kelly.norm()) {}

StepContext SurfacePolicy::at_time(double t) const {
    StepContext c;
    c.t = t;
    c.at = surface_.time_point(t);
    return c;
}

Decision SurfacePolicy::decide(double x, const StepContext& ctx, PathCursor& cursor) const {
    Decision d;
    if (rule_ == StopRule::Always) {
        d.stop = true;
        return d;
    }
    if (x <= ctx.at.g && rule_ == StopRule::Boundary) {
        d.stop = true;
        return d;
    }
    if (x <= 0.0 || multiplier_ == 0.0) return d;
    const double s = multiplier_ * surface_.pi_scale_at(x, ctx.at, cursor.hint_lo, cursor.hint_hi);
    // pi = kelly s, so mu'pi = a^2 s and pi'Sigma pi = a^2 s^2.
    d.drift = a2_ * s;
    d.variance = a2_ * s * s;
    d.pi_norm = kelly_norm_ * std::abs(s);
    return d;
}

FunctionPolicy::FunctionPolicy(std::function<Eigen::VectorXd(double, double)> portfolio,
                               std::function<bool(double, double)> stop, const MarketParams& market)
    : portfolio_(std::move(portfolio)), stop_(std::move(stop)), market_(market) {}

Decision FunctionPolicy::decide(double x, const StepContext& ctx, PathCursor&) const {
    const double t = ctx.t;
    Decision d;
    if (stop_ && stop_(x, t)) {
        d.stop = true;
        return d;
    }
    if (x <= 0.0) return d;
    const Eigen::VectorXd pi = portfolio_(x, t);
    if (pi.size() != market_.mu.size()) throw Error(ErrorKind::Shape, "shape error: portfolio length");
    d.drift = market_.mu.dot(pi);
    d.variance = pi.dot(market_.Sigma * pi);
    d.pi_norm = pi.norm();
    return d;
}

double pairwise_sum(const double* data, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

namespace {

constexpr std::size_t kBlockUnits = 512;

struct Engine {
    const Policy& policy;
    const ProblemSpec& spec;
    double x0, t0, dt;
    std::size_t steps;
    std::uint64_t seed;

    // Simulates block b step by step over all of its paths. A unit is one
    // path, or an antithetic pair sharing one normal per step with opposite
    // signs; each live unit draws exactly one normal per step.
    void block(std::size_t b, std::size_t units, bool antithetic, std::vector<double>& samples,
               std::vector<double>& taus, std::vector<std::uint8_t>& early, const TraceRequest& trace,
               std::vector<TraceRow>& trace_buf) const {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
        std::mt19937_64 eng(seq);
        std::normal_distribution<double> normal;
        const std::size_t begin = b * kBlockUnits;
        const std::size_t end = std::min(units, begin + kBlockUnits);
        const std::size_t lanes = antithetic ? 2 : 1;
        const std::size_t n_units = end - begin;
        const std::size_t n = n_units * lanes;
        const double r = spec.market.r;
        const double sqdt = std::sqrt(dt);

        std::vector<double> x(n, x0), payoff(n, 0.0), tau(n, 0.0), drift(n), vol(n);
        std::vector<std::uint8_t> done(n, 0);
        std::vector<PathCursor> cursor(n);
        std::size_t alive = n;

        for (std::size_t s = 0; alive > 0; ++s) {
            const double t = (s == steps) ? spec.T : t0 + static_cast<double>(s) * dt;
            const StepContext ctx = policy.at_time(t);
            const double disc = std::exp(-r * (t - t0));
            for (std::size_t i = 0; i < n; ++i) {
                if (done[i]) continue;
                const Decision dec = policy.decide(x[i], ctx, cursor[i]);
                const bool stop = dec.stop || s == steps;
                const std::size_t id = begin * lanes + i;
                if (id < trace.paths) trace_buf.push_back({id, s, t, x[i], stop ? 0.0 : dec.pi_norm, stop});
                if (stop) {
                    payoff[i] = disc * exercise_utility(x[i], spec.utility);
                    tau[i] = t;
                    done[i] = 1;
                    --alive;
                    continue;
                }
                drift[i] = (r * x[i] + dec.drift) * dt;
                vol[i] = std::sqrt(dec.variance) * sqdt;
            }
            if (alive == 0) break;
            for (std::size_t u = 0; u < n_units; ++u) {
                const std::size_t i0 = u * lanes;
                bool live = false;
                for (std::size_t l = 0; l < lanes; ++l) live = live || !done[i0 + l];
                if (!live) continue;
                const double z = normal(eng);
                for (std::size_t l = 0; l < lanes; ++l) {
                    const std::size_t i = i0 + l;
                    if (done[i]) continue;
                    const double xn = x[i] + drift[i] + vol[i] * (l == 0 ? z : -z);
                    // Absorb at zero: no investment once wealth is exhausted.
                    x[i] = xn > 0.0 ? xn : 0.0;
                }
            }
        }

        for (std::size_t u = 0; u < n_units; ++u) {
            const std::size_t g = begin + u;
            double sum = 0.0;
            for (std::size_t l = 0; l < lanes; ++l) {
                const std::size_t i = u * lanes + l;
                sum += payoff[i];
                taus[g * lanes + l] = tau[i];
                early[g * lanes + l] = tau[i] < spec.T ? 1 : 0;
            }
            samples[g] = sum / static_cast<double>(lanes);
        }
    }
};

MCEstimate simulate_impl(const Policy& policy, double x0, double t0, const ProblemSpec& spec,
                         const MCConfig& config, const TraceRequest& trace, bool parallel) {
    spec.validate();
    config.validate(spec.T);
    if (!(x0 >= 0.0)) throw Error(ErrorKind::Domain, "x0 must be nonnegative");
    if (!(t0 >= 0.0 && t0 < spec.T)) throw Error(ErrorKind::Domain, "t0 must lie in [0, T)");

    const auto steps = static_cast<std::size_t>(std::ceil((spec.T - t0) / config.dt_sim - 1e-9));
    const Engine engine{policy, spec, x0, t0, (spec.T - t0) / static_cast<double>(steps), steps, config.seed};

    const std::size_t per_unit = config.antithetic ? 2 : 1;
    const std::size_t units = config.n_paths / per_unit;
    const std::size_t blocks = (units + kBlockUnits - 1) / kBlockUnits;
    std::vector<double> samples(units), taus(units * per_unit);
    std::vector<std::uint8_t> early(units * per_unit);
    std::vector<std::vector<TraceRow>> trace_bufs(trace.rows ? blocks : 0);
    std::vector<TraceRow> scratch;

    if (parallel) {
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
            try {
                std::vector<TraceRow> local;
                auto& buf = trace.rows ? trace_bufs[static_cast<std::size_t>(b)] : local;
                engine.block(static_cast<std::size_t>(b), units, config.antithetic, samples, taus, early, trace, buf);
            } catch (...) {
#pragma omp critical(stopvest_mc)
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    } else {
        for (std::size_t b = 0; b < blocks; ++b) {
            auto& buf = trace.rows ? trace_bufs[b] : scratch;
            engine.block(b, units, config.antithetic, samples, taus, early, trace, buf);
        }
    }

    if (trace.rows) {
        trace.rows->clear();
        for (auto& buf : trace_bufs) trace.rows->insert(trace.rows->end(), buf.begin(), buf.end());
        std::stable_sort(trace.rows->begin(), trace.rows->end(), [](const TraceRow& a, const TraceRow& b) {
            return a.path_id != b.path_id ? a.path_id < b.path_id : a.step < b.step;
        });
    }

    MCEstimate est;
    est.n_paths = units * per_unit;
    est.mean = pairwise_sum(samples.data(), units) / static_cast<double>(units);
    std::vector<double> sq(units);
    for (std::size_t i = 0; i < units; ++i) sq[i] = (samples[i] - est.mean) * (samples[i] - est.mean);
    const double var = units > 1 ? pairwise_sum(sq.data(), units) / static_cast<double>(units - 1) : 0.0;
    est.std_err = std::sqrt(var / static_cast<double>(units));
    est.mean_tau = pairwise_sum(taus.data(), taus.size()) / static_cast<double>(taus.size());
    for (auto e : early) est.n_stopped_early += e;
    return est;
}

}  // namespace

MCEstimate simulate_fixed_policy(const Policy& policy, double x0, double t0, const ProblemSpec& spec,
                                 const MCConfig& config, TraceRequest trace) {
    return simulate_impl(policy, x0, t0, spec, config, trace, true);
}

MCEstimate simulate_fixed_policy_serial(const Policy& policy, double x0, double t0, const ProblemSpec& spec,
                                        const MCConfig& config, TraceRequest trace) {
    return simulate_impl(policy, x0, t0, spec, config, trace, false);
}

MCEstimate simulate_value(const PolicySurface& surface, double x0, double t0, const ProblemSpec& spec,
                          const MCConfig& config, TraceRequest trace) {
    if (!(x0 >= 0.0)) throw Error(ErrorKind::Domain, "x0 must be nonnegative");
    if (surface.stop_at(x0, t0)) {
        config.validate(spec.T);
        MCEstimate est;
        est.mean = exercise_utility(x0, spec.utility);
        est.n_paths = config.n_paths;
        est.n_stopped_early = config.n_paths;
        est.mean_tau = t0;
        est.started_in_exercise = true;
        return est;
    }
    const SurfacePolicy policy(surface);
    return simulate_fixed_policy(policy, x0, t0, spec, config, trace);
}

}  // namespace stopvest
