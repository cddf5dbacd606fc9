#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "ecc/categorical.hpp"
#include "ecc/envs.hpp"
#include "ecc/mdp.hpp"
#include "ecc/random.hpp"

namespace ecc {

/// alpha_t = initial / (1 + t * decay); decay == 0 gives a constant rate.
struct StepSizeSchedule {
    double initial = 0.5;
    double decay = 0.0;

    static StepSizeSchedule constant(double alpha) { return {alpha, 0.0}; }
    double at(std::size_t t) const { return initial / (1.0 + static_cast<double>(t) * decay); }
};

/// Linear decay from `start` to `end` over `decay_steps`, then constant.
struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;
    std::size_t decay_steps = 0;

    static EpsilonSchedule constant(double eps) { return {eps, eps, 0}; }
    double at(std::size_t t) const;
};

enum class CdrlMode { evaluation, control };

struct CdrlConfig {
    Support support;
    CdrlMode mode = CdrlMode::control;
    /// Policy under evaluation; required in evaluation mode.
    std::optional<TabularPolicy> fixed_policy;
    StepSizeSchedule step_size{0.5, 0.001};
    EpsilonSchedule behavior_epsilon{1.0, 0.1, 2000};
    std::uint64_t seed = 0;
    std::size_t n_steps = 20000;
    /// Steps between metric samples; 0 records only the final state.
    std::size_t metric_period = 0;
};

/// A sampled (x, a, r, x') with a flag for entering an absorbing state.
struct Transition {
    StateIndex x;
    ActionIndex a;
    double reward;
    StateIndex x_next;
    bool terminal;

    bool operator==(const Transition&) const = default;
};

/// (1 - alpha) * old + alpha * target.
Categorical mixture_update(const Categorical& old, const Categorical& target, double alpha);

/// Projected target for the sampled transition. In control mode the bootstrap
/// action is the greedy action at x'; in evaluation mode it is drawn from the
/// fixed policy using `rng`. Terminal transitions use gamma = 0.
Categorical cdrl_target(const ReturnFunction& eta, const Transition& t, const CdrlConfig& cfg,
                        double gamma, Rng& rng);

/// One CDRL update at step index `step`; only the (x, a) entry changes.
ReturnFunction cdrl_step(const ReturnFunction& eta, const Transition& t, const CdrlConfig& cfg,
                         double gamma, std::size_t step, Rng& rng);

struct CdrlMetric {
    std::size_t step;
    double sup_cramer_to_oracle;
    bool greedy_matches_oracle;
};

struct CdrlRun {
    ReturnFunction eta;
    std::vector<CdrlMetric> metrics;
    /// Oracle fixed point the metrics are measured against.
    ReturnFunction oracle;
};

/// Runs `cfg.n_steps` sampled interactions from the env's start state,
/// resetting at episode ends, starting from uniform distributions.
CdrlRun run_tabular_cdrl(const EnvSpec& env, const CdrlConfig& cfg);

/// Compares greedy actions on non-terminal states.
bool greedy_policies_match(const FiniteMdp& mdp, const QTable& a, const QTable& b);

}  // namespace ecc
