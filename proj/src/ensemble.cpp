#include "ecc/ensemble.hpp"

#include <cmath>
#include <future>
#include <stdexcept>

#include "ecc/mdp.hpp"

namespace ecc {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
        throw std::invalid_argument("replay buffer capacity must be positive");
    }
    storage_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(const Transition& t) {
    if (storage_.size() < capacity_) {
        storage_.push_back(t);
    } else {
        storage_[cursor_] = t;
    }
    cursor_ = (cursor_ + 1) % capacity_;
    count_ = std::min(count_ + 1, capacity_);
}

std::vector<Transition> ReplayBuffer::sample(Rng& rng, std::size_t n) const {
    if (count_ == 0) {
        throw std::logic_error("cannot sample from an empty replay buffer");
    }
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(storage_[rng.index(count_)]);
    }
    return out;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= count_) {
        throw std::out_of_range("replay buffer index out of range");
    }
    return count_ < capacity_ ? storage_[i] : storage_[(cursor_ + i) % capacity_];
}

EnsembleTargetSnapshot::EnsembleTargetSnapshot(std::vector<ApproximatorParams> params,
                                               std::uint64_t version)
    : params_(std::move(params)), version_(version) {
    if (params_.empty()) {
        throw std::invalid_argument("snapshot needs at least one agent");
    }
    for (const auto& p : params_) {
        if (p.architecture() != params_.front().architecture() ||
            !(p.dims() == params_.front().dims())) {
            throw std::invalid_argument("snapshot agents must share one architecture");
        }
    }
}

std::vector<Categorical> ensemble_target_dists(const EnsembleTargetSnapshot& snapshot,
                                               const Support& support,
                                               std::span<const double> features) {
    const std::size_t n_actions = snapshot.params().front().dims().n_actions;
    std::vector<std::vector<Categorical>> per_agent;
    per_agent.reserve(snapshot.size());
    for (const auto& p : snapshot.params()) {
        per_agent.push_back(forward(p, support, features));
    }
    std::vector<Categorical> out;
    out.reserve(n_actions);
    std::vector<Categorical> column;
    for (ActionIndex a = 0; a < n_actions; ++a) {
        column.clear();
        for (const auto& dists : per_agent) {
            column.push_back(dists[a]);
        }
        out.push_back(mix_equal(column));
    }
    return out;
}

Categorical ensemble_target_dist(const EnsembleTargetSnapshot& snapshot, const Support& support,
                                 std::span<const double> features, ActionIndex action) {
    if (action >= snapshot.params().front().dims().n_actions) {
        throw std::out_of_range("action index out of range");
    }
    return ensemble_target_dists(snapshot, support, features)[action];
}

namespace {

Categorical greedy_bootstrap_target(const std::vector<Categorical>& next_dists,
                                    const Transition& t, const Support& support, double gamma) {
    std::vector<double> q;
    q.reserve(next_dists.size());
    for (const auto& d : next_dists) {
        q.push_back(mean(d));
    }
    return bellman_target(support, next_dists[argmax_action(q)], t.reward, gamma);
}

}  // namespace

Categorical ecc_target(const EnsembleTargetSnapshot& snapshot, const Transition& t,
                       std::span<const double> next_features, const Support& support,
                       double gamma) {
    if (t.terminal) {
        return project_dirac(support, t.reward);
    }
    return greedy_bootstrap_target(ensemble_target_dists(snapshot, support, next_features), t,
                                   support, gamma);
}

ActionIndex average_joint_action(std::span<const ApproximatorParams> agents,
                                 const Support& support, std::span<const double> features) {
    if (agents.empty()) {
        throw std::invalid_argument("joint action needs at least one agent");
    }
    std::vector<double> total;
    for (const auto& p : agents) {
        const std::vector<double> q = q_values(p, support, features);
        if (total.empty()) {
            total.assign(q.size(), 0.0);
        }
        for (std::size_t a = 0; a < q.size(); ++a) {
            total[a] += q[a];
        }
    }
    for (double& v : total) {
        v /= static_cast<double>(agents.size());
    }
    return argmax_action(total);
}

double predicted_ensemble_mse(const EnsembleVarianceQuery& q) {
    if (q.k == 0 || !(q.rho >= 0.0 && q.rho <= 1.0) || !(q.sigma2 > 0.0)) {
        throw std::invalid_argument("need k >= 1, rho in [0, 1] and sigma2 > 0");
    }
    const double k = static_cast<double>(q.k);
    return (1.0 + q.rho * (k - 1.0)) * q.sigma2 / k;
}

EccConfig EccConfig::with_defaults(std::size_t n_steps) {
    EccConfig cfg;
    cfg.n_steps = n_steps;
    cfg.epsilon = {1.0, 0.05, n_steps / 10};
    return cfg;
}

void validate(const EccConfig& cfg) {
    if (cfg.k == 0) {
        throw std::invalid_argument("ensemble size k must be at least 1");
    }
    if (cfg.update_period == 0 || cfg.clone_period < cfg.update_period) {
        throw std::invalid_argument("need clone_period >= update_period >= 1");
    }
    if (cfg.batch_size == 0 || cfg.batch_size > cfg.buffer_capacity) {
        throw std::invalid_argument("need 1 <= batch_size <= buffer_capacity");
    }
    if (!(cfg.learning.learning_rate > 0.0)) {
        throw std::invalid_argument("learning rate must be positive");
    }
    if (cfg.learning.clip_norm && !(*cfg.learning.clip_norm > 0.0)) {
        throw std::invalid_argument("gradient clip norm must be positive");
    }
    for (double e : {cfg.epsilon.start, cfg.epsilon.end}) {
        if (!(e >= 0.0 && e <= 1.0)) {
            throw std::invalid_argument("epsilon must lie in [0, 1]");
        }
    }
    if (cfg.architecture == Architecture::one_hidden_layer && cfg.hidden_dim == 0) {
        throw std::invalid_argument("hidden_dim must be positive");
    }
    if (cfg.gamma && !(*cfg.gamma >= 0.0 && *cfg.gamma < 1.0)) {
        throw std::invalid_argument("gamma must lie in [0, 1)");
    }
    if (!(cfg.kl_smoothing >= 0.0)) {
        throw std::invalid_argument("kl_smoothing must be non-negative");
    }
}

AgentStreams agent_streams(std::uint64_t master_seed, std::size_t agent_index) {
    const std::uint64_t base = 3 * static_cast<std::uint64_t>(agent_index);
    return {derive_seed(master_seed, base), derive_seed(master_seed, base + 1),
            derive_seed(master_seed, base + 2)};
}

std::uint64_t evaluation_seed(std::uint64_t seed, std::size_t step) {
    return derive_seed(derive_seed(seed, 0xE7A1ULL), step);
}

double evaluate_policy(const EnvSpec& env_spec,
                       const std::function<ActionIndex(std::span<const double>)>& policy,
                       std::size_t episodes, double epsilon, std::uint64_t seed) {
    if (episodes == 0) {
        throw std::invalid_argument("evaluation needs at least one episode");
    }
    Env env(std::make_shared<const EnvSpec>(env_spec), derive_seed(seed, 0));
    Rng rng(derive_seed(seed, 1));
    double total = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        Observation obs = env.reset();
        while (!env.episode_over()) {
            const bool explore = rng.uniform() < epsilon;
            const std::size_t random_action = rng.index(env.n_actions());
            const ActionIndex a = explore ? random_action : policy(obs.features);
            const StepResult r = env.step(a);
            total += r.reward;
            obs = r.next;
        }
    }
    return total / static_cast<double>(episodes);
}

namespace {

struct ResolvedSettings {
    Support support;
    double gamma;
    ApproxDims dims;
};

ResolvedSettings resolve(const EnvSpec& env, const EccConfig& cfg) {
    if (!cfg.support && !env.support) {
        throw std::invalid_argument("no support configured and the environment declares none");
    }
    const Support support = cfg.support ? *cfg.support : *env.support;
    const double gamma = cfg.gamma.value_or(env.mdp.gamma());
    const ApproxDims dims{env.mdp.n_states(),
                          cfg.architecture == Architecture::one_hidden_layer ? cfg.hidden_dim : 0,
                          env.mdp.n_actions(), support.size()};
    return {support, gamma, dims};
}

// Target distributions of one snapshot, memoised per next state. Valid
// because features are a function of the state index.
class TargetCache {
public:
    TargetCache(std::shared_ptr<const EnsembleTargetSnapshot> snapshot, std::size_t n_states)
        : snapshot_(std::move(snapshot)), entries_(n_states) {}

    Categorical target(const Transition& t, const Support& support, double gamma) {
        if (t.terminal) {
            return project_dirac(support, t.reward);
        }
        auto& entry = entries_[t.x_next];
        if (!entry) {
            entry = ensemble_target_dists(*snapshot_, support,
                                          one_hot(entries_.size(), t.x_next));
        }
        return greedy_bootstrap_target(*entry, t, support, gamma);
    }

private:
    std::shared_ptr<const EnsembleTargetSnapshot> snapshot_;
    std::vector<std::optional<std::vector<Categorical>>> entries_;
};

struct Agent {
    Env env;
    Rng rng;
    ReplayBuffer buffer;
    Observation obs;
};

ActionIndex epsilon_greedy(const ApproximatorParams& params, const Support& support,
                           const Observation& obs, double eps, Rng& rng) {
    if (rng.uniform() < eps) {
        return rng.index(params.dims().n_actions);
    }
    return argmax_action(q_values(params, support, obs.features));
}

void act(Agent& agent, const ApproximatorParams& params, const Support& support, double eps) {
    const ActionIndex a = epsilon_greedy(params, support, agent.obs, eps, agent.rng);
    const StepResult r = agent.env.step(a);
    agent.buffer.push({agent.obs.state, a, r.reward, r.next.state, r.terminal});
    agent.obs = agent.env.episode_over() ? agent.env.reset() : r.next;
}

ApproximatorParams minibatch_step(const ApproximatorParams& params, Agent& agent,
                                  TargetCache& targets, const ResolvedSettings& s,
                                  const EccConfig& cfg) {
    std::vector<double> grad(params.weights().size(), 0.0);
    for (const Transition& t : agent.buffer.sample(agent.rng, cfg.batch_size)) {
        const Categorical target = targets.target(t, s.support, s.gamma);
        accumulate_kl_grad(params, one_hot(s.dims.feature_dim, t.x), t.a, target,
                           cfg.kl_smoothing, grad);
    }
    return apply_update(params, grad, cfg.learning);
}

template <typename Fn>
void for_each_agent(std::size_t k, bool parallel, Fn&& fn) {
    if (!parallel || k == 1) {
        for (std::size_t i = 0; i < k; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::future<void>> jobs;
    jobs.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        jobs.push_back(std::async(std::launch::async, [&fn, i] { fn(i); }));
    }
    for (auto& j : jobs) {
        j.get();
    }
}

bool clone_due(const EccConfig& cfg, std::size_t step) {
    return cfg.clone_when ? cfg.clone_when(step) : step % cfg.clone_period == 0;
}

}  // namespace

EccRun train_ecc(const EnvSpec& env_spec, const EccConfig& cfg,
                 const std::optional<EvalConfig>& eval, const TrainObserver& observer) {
    validate(cfg);
    if (eval && eval->period == 0) {
        throw std::invalid_argument("evaluation period must be positive");
    }
    const ResolvedSettings s = resolve(env_spec, cfg);
    const auto spec = std::make_shared<const EnvSpec>(env_spec);

    std::vector<ApproximatorParams> online;
    std::vector<Agent> agents;
    online.reserve(cfg.k);
    agents.reserve(cfg.k);
    for (std::size_t i = 0; i < cfg.k; ++i) {
        const AgentStreams streams = agent_streams(cfg.seed, cfg.shared_streams ? 0 : i);
        online.push_back(ApproximatorParams::random(cfg.architecture, s.dims, streams.init_seed));
        Env env(spec, streams.env_seed);
        Observation obs = env.reset();
        agents.push_back(
            Agent{std::move(env), Rng(streams.rng_seed), ReplayBuffer(cfg.buffer_capacity), obs});
    }
    auto snapshot = std::make_shared<const EnsembleTargetSnapshot>(online, 0);
    std::vector<TargetCache> caches(cfg.k, TargetCache(snapshot, s.dims.feature_dim));

    EccRun run{{}, {}, {}, 0};
    for (std::size_t step = 1; step <= cfg.n_steps; ++step) {
        const double eps = cfg.epsilon.at(step - 1);
        for_each_agent(cfg.k, cfg.parallel,
                       [&](std::size_t i) { act(agents[i], online[i], s.support, eps); });
        if (step % cfg.update_period == 0) {
            for_each_agent(cfg.k, cfg.parallel, [&](std::size_t i) {
                online[i] = minibatch_step(online[i], agents[i], caches[i], s, cfg);
            });
        }
        if (clone_due(cfg, step)) {
            snapshot = std::make_shared<const EnsembleTargetSnapshot>(online, snapshot->version() + 1);
            caches.assign(cfg.k, TargetCache(snapshot, s.dims.feature_dim));
        }
        if (eval && step % eval->period == 0) {
            const std::uint64_t seed = evaluation_seed(cfg.seed, step);
            EvalPoint point{step, {}, 0.0, snapshot->version()};
            for (const auto& p : online) {
                point.agent_returns.push_back(evaluate_policy(
                    env_spec,
                    [&](std::span<const double> f) {
                        return argmax_action(q_values(p, s.support, f));
                    },
                    eval->episodes, eval->epsilon, seed));
            }
            point.joint_return = evaluate_policy(
                env_spec,
                [&](std::span<const double> f) { return average_joint_action(online, s.support, f); },
                eval->episodes, eval->epsilon, seed);
            run.metrics.push_back(std::move(point));
        }
        if (observer) {
            observer({step, online, snapshot->version()});
        }
    }
    run.agents = std::move(online);
    for (auto& a : agents) {
        run.buffers.push_back(std::move(a.buffer));
    }
    run.snapshot_version = snapshot->version();
    return run;
}

CdrlAgentRun train_cdrl_agent(const EnvSpec& env_spec, const EccConfig& cfg,
                              std::size_t agent_index, const TrainObserver& observer) {
    validate(cfg);
    const ResolvedSettings s = resolve(env_spec, cfg);
    const AgentStreams streams = agent_streams(cfg.seed, agent_index);

    ApproximatorParams params =
        ApproximatorParams::random(cfg.architecture, s.dims, streams.init_seed);
    ApproximatorParams target = params;
    std::uint64_t target_version = 0;
    Env env(std::make_shared<const EnvSpec>(env_spec), streams.env_seed);
    Rng rng(streams.rng_seed);
    ReplayBuffer buffer(cfg.buffer_capacity);
    Observation obs = env.reset();

    std::vector<std::optional<std::vector<Categorical>>> next_dists(s.dims.feature_dim);
    for (std::size_t step = 1; step <= cfg.n_steps; ++step) {
        const ActionIndex a =
            epsilon_greedy(params, s.support, obs, cfg.epsilon.at(step - 1), rng);
        const StepResult r = env.step(a);
        buffer.push({obs.state, a, r.reward, r.next.state, r.terminal});
        obs = env.episode_over() ? env.reset() : r.next;

        if (step % cfg.update_period == 0) {
            std::vector<double> grad(params.weights().size(), 0.0);
            for (const Transition& t : buffer.sample(rng, cfg.batch_size)) {
                Categorical y = project_dirac(s.support, t.reward);
                if (!t.terminal) {
                    auto& cached = next_dists[t.x_next];
                    if (!cached) {
                        cached = forward(target, s.support, one_hot(s.dims.feature_dim, t.x_next));
                    }
                    y = greedy_bootstrap_target(*cached, t, s.support, s.gamma);
                }
                accumulate_kl_grad(params, one_hot(s.dims.feature_dim, t.x), t.a, y,
                                   cfg.kl_smoothing, grad);
            }
            params = apply_update(params, grad, cfg.learning);
        }
        if (clone_due(cfg, step)) {
            target = params;
            ++target_version;
            next_dists.assign(s.dims.feature_dim, std::nullopt);
        }
        if (observer) {
            observer({step, std::span<const ApproximatorParams>(&params, 1), target_version});
        }
    }
    return {std::move(params), std::move(buffer), target_version};
}

}  // namespace ecc
