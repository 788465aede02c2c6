#pragma once

#include "stopvest/model.hpp"
#include "stopvest/primal.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace stopvest {

struct MCConfig {
    std::size_t n_paths = 100000;
    double dt_sim = 1e-3;
    std::uint64_t seed = 20240501;
    bool antithetic = true;

    void validate(double T) const;
};

struct MCEstimate {
    double mean = 0.0;
    double std_err = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_stopped_early = 0;
    double mean_tau = 0.0;
    bool started_in_exercise = false;
};

/// What a policy does at (x, t): stop, or hold a portfolio whose effect on
/// the wealth SDE is summarised by mu' pi (drift) and pi' Sigma pi (variance).
struct Decision {
    bool stop = false;
    double drift = 0.0;
    double variance = 0.0;
    double pi_norm = 0.0;
};

/// Per-path lookup state carried between steps.
struct PathCursor {
    std::size_t hint_lo = 0;
    std::size_t hint_hi = 0;
};

/// Time-dependent lookup state shared by every path at one grid time.
struct StepContext {
    double t = 0.0;
    PolicySurface::TimePoint at{};
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual StepContext at_time(double t) const {
        StepContext c;
        c.t = t;
        return c;
    }
    virtual Decision decide(double x, const StepContext& ctx, PathCursor& cursor) const = 0;
    Decision decide(double x, double t, PathCursor& cursor) const { return decide(x, at_time(t), cursor); }
};

enum class StopRule { Boundary, Always, Never };

/// Reconstructed policy, optionally perturbed: pi = multiplier * pi*(x, t).
class SurfacePolicy final : public Policy {
public:
    explicit SurfacePolicy(const PolicySurface& surface, double pi_multiplier = 1.0,
                           StopRule rule = StopRule::Boundary);
    StepContext at_time(double t) const override;
    Decision decide(double x, const StepContext& ctx, PathCursor& cursor) const override;
    using Policy::decide;

private:
    const PolicySurface& surface_;
    double multiplier_;
    StopRule rule_;
    double a2_;
    double kelly_norm_;
};

/// Caller-supplied portfolio and stopping rule.
class FunctionPolicy final : public Policy {
public:
    FunctionPolicy(std::function<Eigen::VectorXd(double x, double t)> portfolio,
                   std::function<bool(double x, double t)> stop, const MarketParams& market);
    Decision decide(double x, const StepContext& ctx, PathCursor& cursor) const override;
    using Policy::decide;

private:
    std::function<Eigen::VectorXd(double, double)> portfolio_;
    std::function<bool(double, double)> stop_;
    MarketParams market_;
};

struct TraceRow {
    std::size_t path_id;
    std::size_t step;
    double t;
    double x;
    double pi_norm;
    bool stopped;
};

struct TraceRequest {
    std::size_t paths = 0;       // trace paths 0 .. paths-1
    std::vector<TraceRow>* rows = nullptr;
};

/// Euler-Maruyama on dX = (r X + mu'pi) dt + sqrt(pi' Sigma pi) dB from (x0, t0),
/// stopping at the first grid time the policy says so, else at T. Paths run
/// in parallel over fixed blocks with one random stream per block, so the
/// result does not depend on the thread count.
MCEstimate simulate_fixed_policy(const Policy& policy, double x0, double t0, const ProblemSpec& spec,
                                 const MCConfig& config, TraceRequest trace = {});

/// Single-threaded reference of simulate_fixed_policy; bit-identical output.
MCEstimate simulate_fixed_policy_serial(const Policy& policy, double x0, double t0, const ProblemSpec& spec,
                                        const MCConfig& config, TraceRequest trace = {});

/// Value under the reconstructed optimal policy. Starting inside the exercise
/// region returns the exercise utility with zero standard error.
MCEstimate simulate_value(const PolicySurface& surface, double x0, double t0, const ProblemSpec& spec,
                          const MCConfig& config, TraceRequest trace = {});

/// Deterministic pairwise summation.
double pairwise_sum(const double* data, std::size_t n);

}  // namespace stopvest
