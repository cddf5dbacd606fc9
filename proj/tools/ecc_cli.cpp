#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecc/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ecc::ConfigError("cannot open config file " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ecc::SeriesKind series_from_string(const std::string& s) {
    if (s == "joint") {
        return ecc::SeriesKind::joint;
    }
    if (s == "agents") {
        return ecc::SeriesKind::agents;
    }
    throw ecc::ConfigError("series must be 'joint' or 'agents', got '" + s + "'");
}

struct TrainFlags {
    std::string config_file;
    std::string algorithm = "ecc";
    std::string architecture = "tabular";
    std::vector<double> support;
    double gamma = -1.0;
    double clip_norm = 0.0;
};

void add_train_flags(CLI::App& cmd, ecc::ExperimentConfig& cfg, TrainFlags& f) {
    auto& t = cfg.train;
    cmd.add_option("--config", f.config_file, "JSON config; its keys override flags");
    cmd.add_option("--algorithm", f.algorithm, "cdrl or ecc")->capture_default_str();
    cmd.add_option("--env", cfg.env, "Built-in environment name")->capture_default_str();
    cmd.add_option("--env-file", cfg.env_file, "Environment spec file");
    cmd.add_option("--seeds", cfg.n_seeds, "Number of seeds")->capture_default_str();
    cmd.add_option("--seed", cfg.first_seed, "First seed")->capture_default_str();
    cmd.add_option("--eval-period", cfg.eval_period)->capture_default_str();
    cmd.add_option("--eval-episodes", cfg.eval_episodes)->capture_default_str();
    cmd.add_option("--eval-epsilon", cfg.eval_epsilon)->capture_default_str();
    cmd.add_option("--output,-o", cfg.output, "Metrics CSV path")->capture_default_str();
    cmd.add_option("--checkpoint-dir", cfg.checkpoint_dir, "Write final agent parameters here");
    cmd.add_option("--jobs,-j", cfg.jobs, "Concurrent seeds (0 = all cores)")->capture_default_str();
    cmd.add_option("--k", t.k, "Agents per seed")->capture_default_str();
    cmd.add_option("--steps", t.n_steps, "Environment steps per agent")->capture_default_str();
    cmd.add_option("--buffer-capacity", t.buffer_capacity)->capture_default_str();
    cmd.add_option("--batch-size", t.batch_size)->capture_default_str();
    cmd.add_option("--update-period", t.update_period)->capture_default_str();
    cmd.add_option("--clone-period", t.clone_period)->capture_default_str();
    cmd.add_option("--epsilon-start", t.epsilon.start)->capture_default_str();
    cmd.add_option("--epsilon-end", t.epsilon.end)->capture_default_str();
    cmd.add_option("--epsilon-decay-steps", t.epsilon.decay_steps, "Default: steps / 10");
    cmd.add_option("--learning-rate", t.learning.learning_rate)->capture_default_str();
    cmd.add_option("--clip-norm", f.clip_norm, "Gradient norm clip (0 disables)");
    cmd.add_option("--architecture", f.architecture, "tabular or mlp")->capture_default_str();
    cmd.add_option("--hidden-dim", t.hidden_dim)->capture_default_str();
    cmd.add_option("--support", f.support, "z_min z_max atoms")->expected(3);
    cmd.add_option("--gamma", f.gamma, "Discount; default is the environment's");
    cmd.add_option("--kl-smoothing", t.kl_smoothing)->capture_default_str();
    cmd.add_flag("--parallel-agents", t.parallel, "Step agents on worker threads");
}

void finish_train_flags(CLI::App& cmd, ecc::ExperimentConfig& cfg, const TrainFlags& f) {
    cfg.algorithm = ecc::algorithm_from_string(f.algorithm);
    try {
        cfg.train.architecture = ecc::architecture_from_string(f.architecture);
        if (!f.support.empty()) {
            cfg.train.support = ecc::Support(f.support[0], f.support[1],
                                             static_cast<std::size_t>(f.support[2]));
        }
    } catch (const ecc::ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ecc::ConfigError(e.what());
    }
    if (f.gamma >= 0.0) {
        cfg.train.gamma = f.gamma;
    }
    if (f.clip_norm > 0.0) {
        cfg.train.learning.clip_norm = f.clip_norm;
    }
    if (cmd.count("--steps") > 0 && cmd.count("--epsilon-decay-steps") == 0) {
        cfg.train.epsilon.decay_steps = cfg.train.n_steps / 10;
    }
    if (!f.config_file.empty()) {
        ecc::apply_config_json(read_file(f.config_file), cfg);
    }
    ecc::validate(cfg);
}

int cmd_train(CLI::App& cmd, ecc::ExperimentConfig& cfg, const TrainFlags& f) {
    finish_train_flags(cmd, cfg, f);
    std::signal(SIGINT, on_sigint);
    const auto result = ecc::run_experiment(cfg, &g_stop);
    std::cerr << "wrote " << result.metrics.rows.size() << " rows";
    if (result.interrupted) {
        std::cerr << " (interrupted; partial results)";
    }
    std::cerr << '\n';
    return result.interrupted ? 130 : 0;
}

struct EvalFlags {
    std::string env = "two_path";
    std::string env_file;
    std::vector<std::string> checkpoints;
    std::size_t episodes = 100;
    double epsilon = 0.001;
    std::uint64_t seed = 0;
    std::vector<double> support;
};

int cmd_evaluate(const EvalFlags& f) {
    const ecc::EnvSpec env = [&] {
        try {
            return f.env_file.empty() ? ecc::make_env(f.env) : ecc::load_env_spec(f.env_file);
        } catch (const std::exception& e) {
            throw ecc::ConfigError(e.what());
        }
    }();
    std::optional<ecc::Support> support = env.support;
    if (!f.support.empty()) {
        support = ecc::Support(f.support[0], f.support[1], static_cast<std::size_t>(f.support[2]));
    }
    if (!support) {
        throw ecc::ConfigError("environment declares no support; pass --support");
    }
    std::vector<ecc::ApproximatorParams> agents;
    for (const auto& path : f.checkpoints) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw ecc::ConfigError("cannot open checkpoint " + path);
        }
        agents.push_back(ecc::load_checkpoint(in));
    }
    std::cout << "policy,mean_return\n";
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const double r = ecc::evaluate_policy(
            env,
            [&](std::span<const double> x) {
                return ecc::argmax_action(ecc::q_values(agents[i], *support, x));
            },
            f.episodes, f.epsilon, f.seed);
        std::cout << f.checkpoints[i] << ',' << r << '\n';
    }
    if (agents.size() > 1) {
        const double r = ecc::evaluate_policy(
            env,
            [&](std::span<const double> x) { return ecc::average_joint_action(agents, *support, x); },
            f.episodes, f.epsilon, f.seed);
        std::cout << "joint," << r << '\n';
    }
    return 0;
}

struct CompareFlags {
    std::string a;
    std::string b;
    std::string a_series = "joint";
    std::string b_series = "agents";
    std::size_t smooth = 0;
    std::string output;
};

int cmd_compare(const CompareFlags& f) {
    const auto a_kind = series_from_string(f.a_series);
    const auto b_kind = series_from_string(f.b_series);
    const auto a = ecc::read_metrics_csv_file(f.a);
    const auto b = ecc::read_metrics_csv_file(f.b);
    const auto report = ecc::relative_sample_performance(a, a_kind, b, b_kind, f.smooth);
    if (f.output.empty()) {
        ecc::write_relative_report(std::cout, report);
    } else {
        std::ofstream out(f.output);
        ecc::write_relative_report(out, report);
        std::cerr << "overall " << report.overall_percent << "%\n";
    }
    return 0;
}

int cmd_summarize(const std::vector<std::string>& files, const std::string& output) {
    std::vector<ecc::SummaryLine> lines;
    for (const auto& path : files) {
        const auto m = ecc::read_metrics_csv_file(path);
        lines.push_back(ecc::summarize_series(m, ecc::SeriesKind::joint, path));
        lines.push_back(ecc::summarize_series(m, ecc::SeriesKind::agents, path));
    }
    if (output.empty()) {
        ecc::write_summary(std::cout, lines);
    } else {
        std::ofstream out(output);
        ecc::write_summary(out, lines);
    }
    return 0;
}

int cmd_env(const std::string& name, bool list) {
    if (list) {
        for (const auto& e : ecc::built_in_envs()) {
            std::cout << e.name << '\n';
        }
        return 0;
    }
    try {
        ecc::write_env_spec(std::cout, ecc::make_env(name));
    } catch (const std::invalid_argument& e) {
        throw ecc::ConfigError(e.what());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ensemble categorical control experiments"};
    app.require_subcommand(1);

    ecc::ExperimentConfig cfg;
    TrainFlags train_flags;
    auto* train = app.add_subcommand("train", "Train and evaluate every seed, write metrics CSV");
    add_train_flags(*train, cfg, train_flags);

    EvalFlags eval_flags;
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate saved checkpoints");
    evaluate->add_option("--env", eval_flags.env)->capture_default_str();
    evaluate->add_option("--env-file", eval_flags.env_file);
    evaluate->add_option("checkpoints", eval_flags.checkpoints, "Checkpoint files")->required();
    evaluate->add_option("--episodes", eval_flags.episodes)->capture_default_str();
    evaluate->add_option("--epsilon", eval_flags.epsilon)->capture_default_str();
    evaluate->add_option("--seed", eval_flags.seed)->capture_default_str();
    evaluate->add_option("--support", eval_flags.support, "z_min z_max atoms")->expected(3);

    CompareFlags cmp;
    auto* compare = app.add_subcommand("compare", "Relative sample performance of run a vs run b");
    compare->add_option("a", cmp.a, "Metrics CSV of run a")->required();
    compare->add_option("b", cmp.b, "Metrics CSV of run b")->required();
    compare->add_option("--a-series", cmp.a_series, "joint or agents")->capture_default_str();
    compare->add_option("--b-series", cmp.b_series, "joint or agents")->capture_default_str();
    compare->add_option("--smooth", cmp.smooth, "Moving-average window in eval points");
    compare->add_option("--output,-o", cmp.output);

    std::vector<std::string> summary_files;
    std::string summary_output;
    auto* summarize = app.add_subcommand("summarize", "Best scores with 95% intervals");
    summarize->add_option("files", summary_files, "Metrics CSV files")->required();
    summarize->add_option("--output,-o", summary_output);

    std::string env_name = "two_path";
    bool env_list = false;
    auto* env = app.add_subcommand("env", "Print a built-in environment spec");
    env->add_option("name", env_name)->capture_default_str();
    env->add_flag("--list", env_list, "List built-in names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*train) {
            return cmd_train(*train, cfg, train_flags);
        }
        if (*evaluate) {
            return cmd_evaluate(eval_flags);
        }
        if (*compare) {
            return cmd_compare(cmp);
        }
        if (*summarize) {
            return cmd_summarize(summary_files, summary_output);
        }
        return cmd_env(env_name, env_list);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
