#include <doctest.h>

#include <cmath>
#include <random>

#include "ecc/envs.hpp"
#include "ecc/tabular_cdrl.hpp"
#include "oracles.hpp"

using namespace ecc;

namespace {

EnvSpec one_state_env() {
    return EnvSpec{"one_state", FiniteMdp(1, 1, 0.5, {{{1.0, 1.0, 0}}}, {}), 0, 100,
                   Support(0.0, 4.0, 9)};
}

}  // namespace

TEST_CASE("schedules") {
    const StepSizeSchedule a{1.0, 0.01};
    CHECK(a.at(0) == 1.0);
    CHECK(a.at(100) == doctest::Approx(0.5));
    CHECK(StepSizeSchedule::constant(0.3).at(12345) == 0.3);
    const EpsilonSchedule e{1.0, 0.1, 100};
    CHECK(e.at(0) == 1.0);
    CHECK(e.at(50) == doctest::Approx(0.55));
    CHECK(e.at(100) == doctest::Approx(0.1));
    CHECK(e.at(1000) == doctest::Approx(0.1));
}

TEST_CASE("full replacement with alpha 1") {
    const Support s(0.0, 4.0, 9);
    CdrlConfig cfg{s};
    cfg.mode = CdrlMode::evaluation;
    cfg.fixed_policy = TabularPolicy::uniform(1, 1);
    cfg.step_size = StepSizeSchedule::constant(1.0);
    const auto eta = ReturnFunction::filled(1, 1, project_dirac(s, 0.0));
    Rng rng(0);
    const auto next = cdrl_step(eta, {0, 0, 1.0, 0, false}, cfg, 0.5, 0, rng);
    CHECK(next.at(0, 0) == project_dirac(s, 1.0));
}

TEST_CASE("mixture update fixed point and step-4 contract") {
    const Support s(-2.0, 2.0, 9);
    const Categorical nu(s, {0.1, 0.1, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
    CHECK(mixture_update(nu, nu, 0.5) == nu);
    CHECK_THROWS(mixture_update(nu, nu, 0.0));
    CHECK_THROWS(mixture_update(nu, nu, 1.5));

    std::mt19937_64 g(31);
    std::uniform_real_distribution<double> ua(1e-3, 1.0);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto p_old = oracle::random_probs(g, s.size());
        const auto p_target = oracle::random_probs(g, s.size(), trial % 2 == 0);
        const double alpha = ua(g);
        const Categorical old(s, p_old);
        const Categorical target(s, p_target);
        const auto updated = mixture_update(old, target, alpha);
        std::vector<double> p_new(updated.probs().begin(), updated.probs().end());
        CHECK(oracle::kl(p_target, p_new) < oracle::kl(p_target, p_old));
        ++checked;
    }
    CHECK(checked == 1000);
}

TEST_CASE("only the sampled entry changes") {
    const auto env = make_two_path();
    const Support s = *env.support;
    CdrlConfig cfg{s};
    std::mt19937_64 g(37);
    std::vector<Categorical> table;
    for (std::size_t i = 0; i < env.mdp.n_states() * 2; ++i) {
        table.emplace_back(s, oracle::random_probs(g, s.size()));
    }
    const ReturnFunction eta(env.mdp.n_states(), 2, table);
    Rng rng(1);
    const Transition t{2, 0, 0.0, 3, false};
    const auto next = cdrl_step(eta, t, cfg, env.mdp.gamma(), 10, rng);
    for (std::size_t x = 0; x < env.mdp.n_states(); ++x) {
        for (std::size_t a = 0; a < 2; ++a) {
            if (x == 2 && a == 0) {
                CHECK_FALSE(next.at(x, a) == eta.at(x, a));
            } else {
                CHECK(next.at(x, a) == eta.at(x, a));
            }
        }
    }
}

TEST_CASE("control target uses the greedy next action and terminals use delta_r") {
    const Support s(0.0, 4.0, 9);
    CdrlConfig cfg{s};
    auto eta = ReturnFunction::filled(2, 2, Categorical::uniform(s));
    eta.set(1, 0, project_dirac(s, 1.0));
    eta.set(1, 1, project_dirac(s, 3.0));
    Rng rng(0);
    CHECK(cdrl_target(eta, {0, 0, 0.5, 1, false}, cfg, 0.5, rng) == bellman_target(s, eta.at(1, 1), 0.5, 0.5));
    CHECK(cdrl_target(eta, {0, 0, 2.5, 1, true}, cfg, 0.5, rng) == project_dirac(s, 2.5));
    eta.set(1, 1, project_dirac(s, 1.0));
    CHECK(cdrl_target(eta, {0, 0, 0.5, 1, false}, cfg, 0.5, rng) == bellman_target(s, eta.at(1, 0), 0.5, 0.5));
}

TEST_CASE("one-state evaluation converges to delta_2") {
    const auto env = one_state_env();
    CdrlConfig cfg{*env.support};
    cfg.mode = CdrlMode::evaluation;
    cfg.fixed_policy = TabularPolicy::uniform(1, 1);
    cfg.step_size = {1.0, 0.01};
    cfg.n_steps = 50000;
    cfg.seed = 3;
    const auto run = run_tabular_cdrl(env, cfg);
    CHECK(cramer_distance(run.eta.at(0, 0), project_dirac(*env.support, 2.0)) <= 0.05);
    REQUIRE_FALSE(run.metrics.empty());
    CHECK(run.metrics.back().step == 50000);
}

TEST_CASE("zero steps returns the initial return function") {
    const auto env = make_chain(5);
    CdrlConfig cfg{*env.support};
    cfg.n_steps = 0;
    const auto run = run_tabular_cdrl(env, cfg);
    CHECK(run.eta == ReturnFunction::filled(5, 2, Categorical::uniform(*env.support)));
}

TEST_CASE("runs are reproducible from the seed") {
    const auto env = make_two_path();
    CdrlConfig cfg{*env.support};
    cfg.n_steps = 3000;
    cfg.seed = 11;
    cfg.metric_period = 500;
    const auto a = run_tabular_cdrl(env, cfg);
    const auto b = run_tabular_cdrl(env, cfg);
    CHECK(a.eta == b.eta);
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        CHECK(a.metrics[i].sup_cramer_to_oracle == b.metrics[i].sup_cramer_to_oracle);
    }
    cfg.seed = 12;
    CHECK_FALSE(run_tabular_cdrl(env, cfg).eta == a.eta);
}

TEST_CASE("chain control finds the oracle policy on most seeds") {
    const auto env = make_chain(5);
    int matches = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CdrlConfig cfg{*env.support};
        cfg.seed = seed;
        const auto run = run_tabular_cdrl(env, cfg);
        const auto q_star = solve_q_optimal(env.mdp).value;
        if (greedy_policies_match(env.mdp, q_values(run.eta), q_star)) ++matches;
        CHECK(run.metrics.back().greedy_matches_oracle ==
              greedy_policies_match(env.mdp, q_values(run.eta), q_star));
    }
    CHECK(matches >= 18);
}
