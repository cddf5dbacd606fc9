#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ecc/approx.hpp"
#include "ecc/categorical.hpp"
#include "ecc/envs.hpp"
#include "ecc/random.hpp"
#include "ecc/tabular_cdrl.hpp"

namespace ecc {

/// Fixed-capacity ring of transitions; the oldest entry is overwritten when full.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(const Transition& t);
    /// Uniform with replacement over the filled region.
    std::vector<Transition> sample(Rng& rng, std::size_t n) const;

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return count_; }
    bool empty() const { return count_ == 0; }
    /// i-th oldest stored transition.
    const Transition& at(std::size_t i) const;

    bool operator==(const ReplayBuffer&) const = default;

private:
    std::size_t capacity_;
    std::vector<Transition> storage_;
    std::size_t cursor_ = 0;
    std::size_t count_ = 0;
};

/// Frozen copies of every agent's parameters, the source of all ECC targets
/// until the next clone.
class EnsembleTargetSnapshot {
public:
    EnsembleTargetSnapshot(std::vector<ApproximatorParams> params, std::uint64_t version);

    std::span<const ApproximatorParams> params() const { return params_; }
    std::size_t size() const { return params_.size(); }
    std::uint64_t version() const { return version_; }

private:
    std::vector<ApproximatorParams> params_;
    std::uint64_t version_;
};

/// Mean mixture (1/k) sum_i phi(x, a; theta_i^-) for one action.
Categorical ensemble_target_dist(const EnsembleTargetSnapshot& snapshot, const Support& support,
                                 std::span<const double> features, ActionIndex action);

/// Mean mixtures for every action at x.
std::vector<Categorical> ensemble_target_dists(const EnsembleTargetSnapshot& snapshot,
                                               const Support& support,
                                               std::span<const double> features);

/// Projected target shared by every agent trained on `t`: the bootstrap
/// action maximises the snapshot's mean Q at x', and terminal transitions
/// use gamma = 0. `next_features` are the features of t.x_next.
Categorical ecc_target(const EnsembleTargetSnapshot& snapshot, const Transition& t,
                       std::span<const double> next_features, const Support& support,
                       double gamma);

/// argmax_a (1/k) sum_i Q_i(x, a), lowest index on ties.
ActionIndex average_joint_action(std::span<const ApproximatorParams> agents,
                                 const Support& support, std::span<const double> features);

struct EnsembleVarianceQuery {
    std::size_t k;
    double rho;
    double sigma2;
};

/// (1 + rho (k - 1)) sigma^2 / k: mean squared error of the average of k
/// equicorrelated zero-mean errors.
double predicted_ensemble_mse(const EnsembleVarianceQuery& q);

struct EccConfig {
    std::size_t k = 5;
    std::size_t n_steps = 20000;
    std::size_t buffer_capacity = 10000;
    std::size_t batch_size = 32;
    std::size_t update_period = 4;
    std::size_t clone_period = 500;
    /// Linear decay to `end` over `decay_steps`; defaults follow n_steps.
    EpsilonSchedule epsilon{1.0, 0.05, 2000};
    GradientUpdateRule learning{0.05, std::nullopt};
    Architecture architecture = Architecture::tabular_logits;
    std::size_t hidden_dim = 32;
    /// Defaults to the environment's support when unset.
    std::optional<Support> support;
    /// Defaults to the environment's discount when unset.
    std::optional<double> gamma;
    double kl_smoothing = 1e-12;
    std::uint64_t seed = 0;

    /// Optional clone-period schedule; when set it replaces
    /// `step % clone_period == 0` as the clone trigger.
    std::function<bool(std::size_t step)> clone_when;

    /// Test mode: every agent uses agent 0's environment, exploration and
    /// initialisation streams, so all agents see the same transitions.
    bool shared_streams = false;
    /// Run per-agent environment steps and updates on worker threads.
    bool parallel = false;

    /// Epsilon decays over the first 10% of `n_steps`.
    static EccConfig with_defaults(std::size_t n_steps);
};

/// Throws std::invalid_argument on an inconsistent configuration.
void validate(const EccConfig& cfg);

/// Seeds for agent `i`'s private streams.
struct AgentStreams {
    std::uint64_t env_seed;
    std::uint64_t rng_seed;
    std::uint64_t init_seed;
};
AgentStreams agent_streams(std::uint64_t master_seed, std::size_t agent_index);

struct TrainProgress {
    std::size_t step;  // 1-based, after the step's updates and clone
    std::span<const ApproximatorParams> online;
    std::uint64_t snapshot_version;
};

using TrainObserver = std::function<void(const TrainProgress&)>;

struct EvalConfig {
    std::size_t period = 1000;
    std::size_t episodes = 10;
    double epsilon = 0.001;
};

/// Returns of one evaluation point. `agent_returns[i]` is agent i's greedy
/// policy; `joint_return` is the average joint policy.
struct EvalPoint {
    std::size_t step;
    std::vector<double> agent_returns;
    double joint_return;
    std::uint64_t snapshot_version;
};

struct EccRun {
    std::vector<ApproximatorParams> agents;
    std::vector<EvalPoint> metrics;
    std::vector<ReplayBuffer> buffers;
    std::uint64_t snapshot_version;
};

/// Ensemble categorical control training loop.
///
/// Per step every agent acts epsilon-greedily on its own online Q and stores
/// the transition in its own buffer. Every `update_period` steps each agent
/// takes one gradient step on the summed KL loss of a private minibatch
/// against the shared snapshot targets. Every `clone_period` steps the
/// snapshot is rebuilt from all online parameters.
EccRun train_ecc(const EnvSpec& env, const EccConfig& cfg,
                 const std::optional<EvalConfig>& eval = std::nullopt,
                 const TrainObserver& observer = nullptr);

struct CdrlAgentRun {
    ApproximatorParams params;
    ReplayBuffer buffer;
    std::uint64_t target_version;
};

/// Single-agent categorical control with its own target network, using
/// agent `agent_index`'s streams from `cfg.seed`. `cfg.k` is ignored.
CdrlAgentRun train_cdrl_agent(const EnvSpec& env, const EccConfig& cfg, std::size_t agent_index,
                              const TrainObserver& observer = nullptr);

/// Mean undiscounted return over `episodes` episodes. Each evaluation builds
/// its env and exploration streams from `seed`, so policies evaluated with
/// the same seed face the same randomness.
double evaluate_policy(const EnvSpec& env,
                       const std::function<ActionIndex(std::span<const double>)>& policy,
                       std::size_t episodes, double epsilon, std::uint64_t seed);

/// Seed for evaluation at `step` of a run with master seed `seed`.
std::uint64_t evaluation_seed(std::uint64_t seed, std::size_t step);

}  // namespace ecc
