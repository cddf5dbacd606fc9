#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ecc/categorical.hpp"
#include "ecc/mdp.hpp"
#include "ecc/random.hpp"

namespace ecc {

/// An environment definition: the exact kernel plus the episodic wrapper
/// needed to sample from it.
struct EnvSpec {
    std::string name;
    FiniteMdp mdp;
    StateIndex start_state = 0;
    std::size_t episode_cap = 100;
    /// Support wide enough for every discounted return of the env.
    std::optional<Support> support;
};

struct Observation {
    StateIndex state;
    std::vector<double> features;  // one-hot over states
};

struct StepResult {
    double reward;
    Observation next;
    bool terminal;   // entered an absorbing state
    bool truncated;  // hit the episode cap in a non-terminal state
};

/// Sampling view of an EnvSpec with its own RNG stream.
class Env {
public:
    Env(std::shared_ptr<const EnvSpec> spec, std::uint64_t seed);

    Observation reset();
    /// Throws std::logic_error when called before reset or after the episode ended.
    StepResult step(ActionIndex action);

    bool episode_over() const { return over_; }
    StateIndex state() const { return state_; }
    std::size_t episode_steps() const { return steps_; }
    const EnvSpec& spec() const { return *spec_; }
    std::size_t feature_dim() const { return spec_->mdp.n_states(); }
    std::size_t n_actions() const { return spec_->mdp.n_actions(); }

private:
    std::shared_ptr<const EnvSpec> spec_;
    Rng rng_;
    StateIndex state_ = 0;
    std::size_t steps_ = 0;
    bool started_ = false;
    bool over_ = false;
};

std::vector<double> one_hot(std::size_t dim, std::size_t index);

/// Deterministic corridor of n states; action 1 moves right, action 0 left.
/// Entering the last state pays 1 and ends the episode.
EnvSpec make_chain(std::size_t n, double gamma = 0.9);

/// width x height cliff walk. Start bottom-left, goal bottom-right, cliff
/// cells between them pay -100 and end the episode; other moves pay -1.
/// Actions: 0 up, 1 right, 2 down, 3 left.
EnvSpec make_cliff(std::size_t width, std::size_t height, double gamma = 0.9);

struct TwoPathParams {
    std::size_t safe_length = 3;
    std::size_t risky_length = 3;
    double safe_reward = 4.0;
    double risky_high = 10.0;
    double risky_low = 0.0;
    double risky_high_prob = 0.5;
    double retreat_penalty = -1.0;
    double gamma = 0.9;
    std::size_t episode_cap = 50;
};

/// Start state with a deterministic safe corridor (action 0) and a risky
/// corridor (action 1) whose final reward is bimodal. Inside a corridor,
/// action 0 advances and action 1 retreats to the start with a penalty.
EnvSpec make_two_path(const TwoPathParams& params = {});

/// chain5, cliff (12x4), two_path.
std::vector<EnvSpec> built_in_envs();

/// Looks up `chain`, `chainN`, `cliff`, `cliffWxH` or `two_path`.
EnvSpec make_env(const std::string& name);

/// MDP file format plus `name`, `start`, `episode_cap` and optional
/// `support z_min z_max K` header lines.
EnvSpec parse_env_spec(std::istream& in);
EnvSpec load_env_spec(const std::string& path);
void write_env_spec(std::ostream& out, const EnvSpec& spec);

}  // namespace ecc
