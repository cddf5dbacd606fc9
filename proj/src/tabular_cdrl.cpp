#include "ecc/tabular_cdrl.hpp"

#include <algorithm>
#include <array>
#include <memory>
#include <stdexcept>

namespace ecc {

double EpsilonSchedule::at(std::size_t t) const {
    if (decay_steps == 0 || t >= decay_steps) {
        return end;
    }
    const double frac = static_cast<double>(t) / static_cast<double>(decay_steps);
    return start + (end - start) * frac;
}

Categorical mixture_update(const Categorical& old, const Categorical& target, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("step size must lie in (0, 1]");
    }
    const std::array<Categorical, 2> pair{old, target};
    const std::array<double, 2> w{1.0 - alpha, alpha};
    return mix(pair, w);
}

namespace {

ActionIndex sample_action(std::span<const double> probs, Rng& rng) {
    const double u = rng.uniform();
    double cumulative = 0.0;
    for (ActionIndex a = 0; a < probs.size(); ++a) {
        cumulative += probs[a];
        if (u < cumulative) {
            return a;
        }
    }
    // u landed in the rounding gap; take the last action with mass.
    for (ActionIndex a = probs.size(); a-- > 0;) {
        if (probs[a] > 0.0) {
            return a;
        }
    }
    return 0;
}

ActionIndex greedy_action(const ReturnFunction& eta, StateIndex x) {
    std::vector<double> q(eta.n_actions());
    for (ActionIndex a = 0; a < eta.n_actions(); ++a) {
        q[a] = mean(eta.at(x, a));
    }
    return argmax_action(q);
}

void validate(const CdrlConfig& cfg, const FiniteMdp& mdp) {
    if (cfg.mode == CdrlMode::evaluation) {
        if (!cfg.fixed_policy) {
            throw std::invalid_argument("evaluation mode needs a fixed policy");
        }
        if (cfg.fixed_policy->n_states() != mdp.n_states() ||
            cfg.fixed_policy->n_actions() != mdp.n_actions()) {
            throw std::invalid_argument("fixed policy shape does not match the MDP");
        }
    }
    const double a0 = cfg.step_size.at(0);
    if (!(a0 > 0.0 && a0 <= 1.0) || cfg.step_size.decay < 0.0) {
        throw std::invalid_argument("step sizes must stay in (0, 1]");
    }
    for (double e : {cfg.behavior_epsilon.start, cfg.behavior_epsilon.end}) {
        if (!(e >= 0.0 && e <= 1.0)) {
            throw std::invalid_argument("behaviour epsilon must lie in [0, 1]");
        }
    }
}

}  // namespace

Categorical cdrl_target(const ReturnFunction& eta, const Transition& t, const CdrlConfig& cfg,
                        double gamma, Rng& rng) {
    if (t.terminal) {
        return project_dirac(cfg.support, t.reward);
    }
    ActionIndex next_action = 0;
    if (cfg.mode == CdrlMode::control) {
        next_action = greedy_action(eta, t.x_next);
    } else {
        next_action = sample_action(cfg.fixed_policy.value().row(t.x_next), rng);
    }
    return bellman_target(cfg.support, eta.at(t.x_next, next_action), t.reward, gamma);
}

ReturnFunction cdrl_step(const ReturnFunction& eta, const Transition& t, const CdrlConfig& cfg,
                         double gamma, std::size_t step, Rng& rng) {
    if (!(eta.support() == cfg.support)) {
        throw SupportMismatch("return function is not on the configured support");
    }
    ReturnFunction next = eta;
    const Categorical target = cdrl_target(eta, t, cfg, gamma, rng);
    next.set(t.x, t.a, mixture_update(eta.at(t.x, t.a), target, cfg.step_size.at(step)));
    return next;
}

bool greedy_policies_match(const FiniteMdp& mdp, const QTable& a, const QTable& b) {
    for (StateIndex x = 0; x < mdp.n_states(); ++x) {
        if (mdp.is_terminal(x)) {
            continue;
        }
        if (argmax_action(a.row(x)) != argmax_action(b.row(x))) {
            return false;
        }
    }
    return true;
}

CdrlRun run_tabular_cdrl(const EnvSpec& env_spec, const CdrlConfig& cfg) {
    const FiniteMdp& mdp = env_spec.mdp;
    validate(cfg, mdp);

    const ReturnFunction init =
        ReturnFunction::filled(mdp.n_states(), mdp.n_actions(), Categorical::uniform(cfg.support));
    ClipReport quiet;
    auto oracle_op = [&](const ReturnFunction& eta) {
        return cfg.mode == CdrlMode::control ? dist_optimality(mdp, eta, &quiet)
                                             : dist_bellman(mdp, *cfg.fixed_policy, eta, &quiet);
    };
    ReturnFunction oracle =
        solve_fixed_point<ReturnFunction>(oracle_op, init, sup_cramer_distance, 1e-10, 10000).value;
    const QTable oracle_q = cfg.mode == CdrlMode::control
                                ? solve_q_optimal(mdp).value
                                : solve_q_evaluation(mdp, *cfg.fixed_policy).value;

    CdrlRun run{init, {}, oracle};
    auto record = [&](std::size_t step) {
        run.metrics.push_back({step, sup_cramer_distance(run.eta, run.oracle),
                               greedy_policies_match(mdp, q_values(run.eta), oracle_q)});
    };

    Env env(std::make_shared<const EnvSpec>(env_spec), derive_seed(cfg.seed, 0));
    Rng rng(derive_seed(cfg.seed, 1));
    Observation obs = env.reset();
    for (std::size_t step = 0; step < cfg.n_steps; ++step) {
        if (cfg.metric_period != 0 && step % cfg.metric_period == 0) {
            record(step);
        }
        if (env.episode_over()) {
            obs = env.reset();
        }
        const double eps = cfg.behavior_epsilon.at(step);
        ActionIndex action = 0;
        if (rng.uniform() < eps) {
            action = rng.index(mdp.n_actions());
        } else if (cfg.mode == CdrlMode::control) {
            action = greedy_action(run.eta, obs.state);
        } else {
            action = sample_action(cfg.fixed_policy->row(obs.state), rng);
        }
        const StepResult result = env.step(action);
        const Transition t{obs.state, action, result.reward, result.next.state, result.terminal};
        const Categorical target = cdrl_target(run.eta, t, cfg, mdp.gamma(), rng);
        run.eta.set(t.x, t.a, mixture_update(run.eta.at(t.x, t.a), target, cfg.step_size.at(step)));
        obs = result.next;
    }
    record(cfg.n_steps);
    return run;
}

}  // namespace ecc
