#include "ecc/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace ecc {

namespace {

struct Interrupted {};

std::string format_double(double v) {
    if (v == 0.0) {
        return "0";  // folds -0
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <typename T>
T parse_field(const std::string& token, std::size_t line, const char* name) {
    T value{};
    const auto* end = token.data() + token.size();
    const auto res = std::from_chars(token.data(), end, value);
    if (res.ec != std::errc() || res.ptr != end) {
        throw std::runtime_error("metrics line " + std::to_string(line) + ": bad " + name + " '" +
                                 token + "'");
    }
    return value;
}

double parse_double(const std::string& token, std::size_t line, const char* name) {
    if (token == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return parse_field<double>(token, line, name);
}

bool row_order(const MetricRow& a, const MetricRow& b) {
    if (a.seed != b.seed) {
        return a.seed < b.seed;
    }
    if (a.step != b.step) {
        return a.step < b.step;
    }
    // joint (-1) sorts after every agent
    const auto key = [](long agent) {
        return agent == kJointAgent ? std::numeric_limits<long>::max() : agent;
    };
    return key(a.agent) < key(b.agent);
}

class RowRecorder {
public:
    RowRecorder(std::uint64_t seed, std::ostream* sink) : seed_(seed), sink_(sink) {}

    void add(std::size_t step, std::size_t total_samples, long agent, double mean_return,
             std::uint64_t version) {
        auto [it, fresh] = best_.try_emplace(agent, mean_return);
        if (!fresh) {
            it->second = std::max(it->second, mean_return);
        }
        rows_.push_back({seed_, step, total_samples, agent, mean_return, it->second, version});
        if (sink_ != nullptr) {
            *sink_ << format_row(rows_.back()) << '\n';
            sink_->flush();
        }
    }

    std::vector<MetricRow> take() {
        std::stable_sort(rows_.begin(), rows_.end(), row_order);
        return std::move(rows_);
    }

private:
    std::uint64_t seed_;
    std::ostream* sink_;
    std::map<long, double> best_;
    std::vector<MetricRow> rows_;
};

std::function<ActionIndex(std::span<const double>)> greedy(const ApproximatorParams& p,
                                                           const Support& support) {
    return [&p, &support](std::span<const double> f) {
        return argmax_action(q_values(p, support, f));
    };
}

void write_checkpoints(const ExperimentConfig& cfg, std::uint64_t seed,
                       std::span<const ApproximatorParams> agents) {
    if (cfg.checkpoint_dir.empty()) {
        return;
    }
    std::filesystem::create_directories(cfg.checkpoint_dir);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto path = std::filesystem::path(cfg.checkpoint_dir) /
                          ("seed" + std::to_string(seed) + "_agent" + std::to_string(i) + ".ckpt");
        std::ofstream out(path, std::ios::binary);
        save_checkpoint(out, agents[i]);
    }
}

std::vector<MetricRow> run_seed_impl(const ExperimentConfig& cfg, const EnvSpec& env,
                                     std::uint64_t seed, const std::atomic<bool>* stop,
                                     std::ostream* sink, bool& interrupted) {
    EccConfig train = cfg.train;
    train.seed = seed;
    const Support support = train.support ? *train.support : env.support.value();
    const std::size_t k = train.k;
    RowRecorder rec(seed, sink);
    auto check_stop = [&] {
        if (stop != nullptr && stop->load()) {
            throw Interrupted{};
        }
    };
    auto evaluate = [&](const ApproximatorParams& p, std::uint64_t eval_seed) {
        return evaluate_policy(env, greedy(p, support), cfg.eval_episodes, cfg.eval_epsilon,
                               eval_seed);
    };

    interrupted = false;
    if (cfg.algorithm == Algorithm::ecc) {
        std::vector<ApproximatorParams> final_params;
        auto observer = [&](const TrainProgress& p) {
            check_stop();
            if (p.step % cfg.eval_period != 0) {
                return;
            }
            const std::uint64_t eval_seed = evaluation_seed(seed, p.step);
            for (std::size_t i = 0; i < p.online.size(); ++i) {
                rec.add(p.step, k * p.step, static_cast<long>(i), evaluate(p.online[i], eval_seed),
                        p.snapshot_version);
            }
            const double joint = evaluate_policy(
                env,
                [&](std::span<const double> f) { return average_joint_action(p.online, support, f); },
                cfg.eval_episodes, cfg.eval_epsilon, eval_seed);
            rec.add(p.step, k * p.step, kJointAgent, joint, p.snapshot_version);
        };
        try {
            EccRun run = train_ecc(env, train, std::nullopt, observer);
            write_checkpoints(cfg, seed, run.agents);
        } catch (const Interrupted&) {
            interrupted = true;
        }
        return rec.take();
    }

    // Independent single agents; the joint policy is evaluated on their
    // parameters captured at each evaluation step.
    std::vector<std::vector<std::pair<ApproximatorParams, std::uint64_t>>> captured(k);
    std::vector<ApproximatorParams> final_params;
    try {
        for (std::size_t i = 0; i < k; ++i) {
            auto observer = [&](const TrainProgress& p) {
                check_stop();
                if (p.step % cfg.eval_period != 0) {
                    return;
                }
                const ApproximatorParams& params = p.online.front();
                captured[i].emplace_back(params, p.snapshot_version);
                rec.add(p.step, p.step, static_cast<long>(i),
                        evaluate(params, evaluation_seed(seed, p.step)), p.snapshot_version);
            };
            final_params.push_back(train_cdrl_agent(env, train, i, observer).params);
        }
        write_checkpoints(cfg, seed, final_params);
    } catch (const Interrupted&) {
        interrupted = true;
    }
    std::size_t complete_points = captured.front().size();
    for (const auto& c : captured) {
        complete_points = std::min(complete_points, c.size());
    }
    for (std::size_t point = 0; point < complete_points; ++point) {
        const std::size_t step = (point + 1) * cfg.eval_period;
        std::vector<ApproximatorParams> agents;
        for (const auto& c : captured) {
            agents.push_back(c[point].first);
        }
        const double joint = evaluate_policy(
            env, [&](std::span<const double> f) { return average_joint_action(agents, support, f); },
            cfg.eval_episodes, cfg.eval_epsilon, evaluation_seed(seed, step));
        rec.add(step, k * step, kJointAgent, joint, captured.front()[point].second);
    }
    return rec.take();
}

std::string output_path(const ExperimentConfig& cfg) {
    if (const char* dir = std::getenv("ECC_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
        return (std::filesystem::path(dir) / std::filesystem::path(cfg.output).filename()).string();
    }
    return cfg.output;
}

}  // namespace

std::string to_string(Algorithm a) { return a == Algorithm::ecc ? "ecc" : "cdrl"; }

Algorithm algorithm_from_string(const std::string& name) {
    if (name == "ecc") {
        return Algorithm::ecc;
    }
    if (name == "cdrl") {
        return Algorithm::cdrl;
    }
    throw ConfigError("unknown algorithm '" + name + "' (expected cdrl or ecc)");
}

void apply_config_json(const std::string& json_text, ExperimentConfig& cfg) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    bool decay_given = false;
    bool steps_given = false;
    try {
        for (const auto& [key, v] : j.items()) {
            auto& t = cfg.train;
            if (key == "algorithm") {
                cfg.algorithm = algorithm_from_string(v.get<std::string>());
            } else if (key == "env") {
                cfg.env = v.get<std::string>();
            } else if (key == "env_file") {
                cfg.env_file = v.get<std::string>();
            } else if (key == "n_seeds") {
                cfg.n_seeds = v.get<std::size_t>();
            } else if (key == "seed") {
                cfg.first_seed = v.get<std::uint64_t>();
            } else if (key == "eval_period") {
                cfg.eval_period = v.get<std::size_t>();
            } else if (key == "eval_episodes") {
                cfg.eval_episodes = v.get<std::size_t>();
            } else if (key == "eval_epsilon") {
                cfg.eval_epsilon = v.get<double>();
            } else if (key == "output") {
                cfg.output = v.get<std::string>();
            } else if (key == "checkpoint_dir") {
                cfg.checkpoint_dir = v.get<std::string>();
            } else if (key == "jobs") {
                cfg.jobs = v.get<std::size_t>();
            } else if (key == "k") {
                t.k = v.get<std::size_t>();
            } else if (key == "n_steps") {
                t.n_steps = v.get<std::size_t>();
                steps_given = true;
            } else if (key == "buffer_capacity") {
                t.buffer_capacity = v.get<std::size_t>();
            } else if (key == "batch_size") {
                t.batch_size = v.get<std::size_t>();
            } else if (key == "update_period") {
                t.update_period = v.get<std::size_t>();
            } else if (key == "clone_period") {
                t.clone_period = v.get<std::size_t>();
            } else if (key == "epsilon_start") {
                t.epsilon.start = v.get<double>();
            } else if (key == "epsilon_end") {
                t.epsilon.end = v.get<double>();
            } else if (key == "epsilon_decay_steps") {
                t.epsilon.decay_steps = v.get<std::size_t>();
                decay_given = true;
            } else if (key == "learning_rate") {
                t.learning.learning_rate = v.get<double>();
            } else if (key == "clip_norm") {
                if (v.is_null()) {
                    t.learning.clip_norm.reset();
                } else {
                    t.learning.clip_norm = v.get<double>();
                }
            } else if (key == "architecture") {
                t.architecture = architecture_from_string(v.get<std::string>());
            } else if (key == "hidden_dim") {
                t.hidden_dim = v.get<std::size_t>();
            } else if (key == "support") {
                if (!v.is_array() || v.size() != 3) {
                    throw ConfigError("support must be [z_min, z_max, atoms]");
                }
                t.support = Support(v[0].get<double>(), v[1].get<double>(), v[2].get<std::size_t>());
            } else if (key == "gamma") {
                t.gamma = v.get<double>();
            } else if (key == "kl_smoothing") {
                t.kl_smoothing = v.get<double>();
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config value has the wrong type: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (steps_given && !decay_given) {
        cfg.train.epsilon.decay_steps = cfg.train.n_steps / 10;
    }
}

void validate(const ExperimentConfig& cfg) {
    try {
        validate(cfg.train);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.n_seeds == 0) {
        throw ConfigError("n_seeds must be at least 1");
    }
    if (cfg.eval_period == 0 || cfg.eval_episodes == 0) {
        throw ConfigError("eval_period and eval_episodes must be positive");
    }
    if (!(cfg.eval_epsilon >= 0.0 && cfg.eval_epsilon <= 1.0)) {
        throw ConfigError("eval_epsilon must lie in [0, 1]");
    }
    if (cfg.output.empty()) {
        throw ConfigError("output path is empty");
    }
}

EnvSpec resolve_env(const ExperimentConfig& cfg) {
    try {
        EnvSpec env = cfg.env_file.empty() ? make_env(cfg.env) : load_env_spec(cfg.env_file);
        if (!cfg.train.support && !env.support) {
            throw ConfigError("environment declares no support; set one in the config");
        }
        return env;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

std::string format_row(const MetricRow& r) {
    std::string out;
    out += std::to_string(r.seed);
    out += ',';
    out += std::to_string(r.step);
    out += ',';
    out += std::to_string(r.total_samples);
    out += ',';
    out += r.agent == kJointAgent ? std::string("joint") : std::to_string(r.agent);
    out += ',';
    out += format_double(r.mean_return);
    out += ',';
    out += format_double(r.best_so_far);
    out += ',';
    out += std::to_string(r.snapshot_version);
    return out;
}

void write_metrics_csv(std::ostream& out, const MetricsFile& file) {
    out << "# ecc-metrics v1";
    for (const auto& [k, v] : file.meta) {
        out << ' ' << k << '=' << v;
    }
    out << '\n' << kCsvColumns << '\n';
    for (const auto& r : file.rows) {
        out << format_row(r) << '\n';
    }
}

MetricsFile read_metrics_csv(std::istream& in) {
    MetricsFile file;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ecc-metrics v1", 0) != 0) {
        throw std::runtime_error("metrics file lacks the '# ecc-metrics v1' header");
    }
    std::istringstream meta(line.substr(16));
    for (std::string kv; meta >> kv;) {
        const auto eq = kv.find('=');
        if (eq != std::string::npos) {
            file.meta[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
    }
    if (!std::getline(in, line) || line != kCsvColumns) {
        throw std::runtime_error("metrics file has an unexpected column header");
    }
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) {
            f.push_back(cell);
        }
        if (f.size() != 7) {
            throw std::runtime_error("metrics line " + std::to_string(line_no) + " has " +
                                     std::to_string(f.size()) + " fields");
        }
        MetricRow r{};
        r.seed = parse_field<std::uint64_t>(f[0], line_no, "seed");
        r.step = parse_field<std::size_t>(f[1], line_no, "step");
        r.total_samples = parse_field<std::size_t>(f[2], line_no, "total_samples");
        r.agent = f[3] == "joint" ? kJointAgent : parse_field<long>(f[3], line_no, "agent");
        r.mean_return = parse_double(f[4], line_no, "mean_return");
        r.best_so_far = parse_double(f[5], line_no, "best_so_far");
        r.snapshot_version = parse_field<std::uint64_t>(f[6], line_no, "snapshot_version");
        file.rows.push_back(r);
    }
    return file;
}

MetricsFile read_metrics_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open metrics file " + path);
    }
    return read_metrics_csv(in);
}

std::vector<MetricRow> run_seed(const ExperimentConfig& cfg, const EnvSpec& env,
                                std::uint64_t seed, const std::atomic<bool>* stop) {
    bool interrupted = false;
    return run_seed_impl(cfg, env, seed, stop, nullptr, interrupted);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::atomic<bool>* stop) {
    validate(cfg);
    const EnvSpec env = resolve_env(cfg);
    const std::string out_path = output_path(cfg);
    if (const auto parent = std::filesystem::path(out_path).parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
    }

    std::vector<std::vector<MetricRow>> per_seed(cfg.n_seeds);
    std::vector<char> seed_interrupted(cfg.n_seeds, 0);
    std::vector<std::string> part_paths(cfg.n_seeds);
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;

    auto worker = [&] {
        for (std::size_t s = next++; s < cfg.n_seeds; s = next++) {
            const std::uint64_t seed = cfg.first_seed + s;
            part_paths[s] = out_path + ".seed" + std::to_string(seed) + ".part";
            try {
                std::ofstream part(part_paths[s]);
                bool interrupted = false;
                per_seed[s] = run_seed_impl(cfg, env, seed, stop, &part, interrupted);
                seed_interrupted[s] = interrupted ? 1 : 0;
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
    };
    std::size_t n_workers = cfg.jobs != 0 ? cfg.jobs : std::thread::hardware_concurrency();
    n_workers = std::clamp<std::size_t>(n_workers, 1, cfg.n_seeds);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }

    ExperimentResult result;
    const std::size_t dropped = cfg.train.n_steps % cfg.eval_period;
    result.metrics.meta = {
        {"algorithm", to_string(cfg.algorithm)},
        {"env", env.name},
        {"k", std::to_string(cfg.train.k)},
        {"n_steps", std::to_string(cfg.train.n_steps)},
        {"eval_period", std::to_string(cfg.eval_period)},
        {"eval_episodes", std::to_string(cfg.eval_episodes)},
        {"dropped_tail_steps", std::to_string(dropped)},
        {"samples_per_step", cfg.algorithm == Algorithm::ecc ? std::to_string(cfg.train.k) : "1"},
    };
    for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
        result.interrupted = result.interrupted || seed_interrupted[s] != 0;
        for (auto& r : per_seed[s]) {
            result.metrics.rows.push_back(r);
        }
    }
    if (result.interrupted) {
        result.metrics.meta["interrupted"] = "1";
    }
    {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write " + out_path);
        }
        write_metrics_csv(out, result.metrics);
    }
    for (const auto& p : part_paths) {
        if (!p.empty()) {
            std::filesystem::remove(p);
        }
    }
    return result;
}

std::vector<CurvePoint> extract_curve(const MetricsFile& file, SeriesKind kind) {
    // step -> seed -> (sum, count, total_samples)
    struct Acc {
        double sum = 0.0;
        std::size_t count = 0;
        std::size_t samples = 0;
    };
    std::map<std::size_t, std::map<std::uint64_t, Acc>> by_step;
    for (const auto& r : file.rows) {
        const bool joint = r.agent == kJointAgent;
        if ((kind == SeriesKind::joint) != joint) {
            continue;
        }
        Acc& acc = by_step[r.step][r.seed];
        acc.sum += r.mean_return;
        ++acc.count;
        acc.samples = r.total_samples;
    }
    std::vector<CurvePoint> curve;
    for (const auto& [step, seeds] : by_step) {
        double total = 0.0;
        std::size_t samples = 0;
        for (const auto& [seed, acc] : seeds) {
            total += acc.sum / static_cast<double>(acc.count);
            samples = acc.samples;
        }
        curve.push_back({samples, total / static_cast<double>(seeds.size())});
    }
    std::stable_sort(curve.begin(), curve.end(), [](const CurvePoint& a, const CurvePoint& b) {
        return a.total_samples < b.total_samples;
    });
    return curve;
}

std::vector<CurvePoint> smooth(const std::vector<CurvePoint>& curve, std::size_t window) {
    if (window <= 1) {
        return curve;
    }
    std::vector<CurvePoint> out;
    out.reserve(curve.size());
    double running = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        running += curve[i].value;
        if (i >= window) {
            running -= curve[i - window].value;
        }
        const std::size_t n = std::min(i + 1, window);
        out.push_back({curve[i].total_samples, running / static_cast<double>(n)});
    }
    return out;
}

namespace {

double percent_of(double a, double b) {
    if (a == b) {
        return 100.0;
    }
    if (b == 0.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return 100.0 * a / b;
}

}  // namespace

RelativePerformance relative_sample_performance(const std::vector<CurvePoint>& a,
                                                const std::vector<CurvePoint>& b) {
    RelativePerformance report{{}, std::numeric_limits<double>::quiet_NaN(),
                               "piecewise-constant (last observation carried forward) on run a's "
                               "sample counts"};
    if (a.empty() || b.empty()) {
        return report;
    }
    const std::size_t horizon = std::min(a.back().total_samples, b.back().total_samples);
    double sum_a = 0.0;
    double sum_b = 0.0;
    std::size_t j = 0;
    for (const auto& pa : a) {
        if (pa.total_samples > horizon) {
            break;
        }
        while (j + 1 < b.size() && b[j + 1].total_samples <= pa.total_samples) {
            ++j;
        }
        if (b[j].total_samples > pa.total_samples) {
            continue;  // nothing observed yet on b
        }
        const double vb = b[j].value;
        report.points.push_back({pa.total_samples, pa.value, vb, percent_of(pa.value, vb)});
        sum_a += pa.value;
        sum_b += vb;
    }
    if (!report.points.empty()) {
        report.overall_percent = percent_of(sum_a, sum_b);
    }
    return report;
}

RelativePerformance relative_sample_performance(const MetricsFile& a, SeriesKind a_kind,
                                                const MetricsFile& b, SeriesKind b_kind,
                                                std::size_t smooth_window) {
    const auto env_a = a.meta.find("env");
    const auto env_b = b.meta.find("env");
    if (env_a != a.meta.end() && env_b != b.meta.end() && env_a->second != env_b->second) {
        throw std::invalid_argument("cannot compare runs on different environments (" +
                                    env_a->second + " vs " + env_b->second + ")");
    }
    return relative_sample_performance(smooth(extract_curve(a, a_kind), smooth_window),
                                       smooth(extract_curve(b, b_kind), smooth_window));
}

MetricsFile as_correlated_ensemble(const MetricsFile& single, std::size_t k) {
    MetricsFile out = single;
    out.meta["samples_per_step"] = std::to_string(k);
    out.meta["k"] = std::to_string(k);
    for (auto& r : out.rows) {
        r.total_samples = k * r.step;
    }
    return out;
}

std::map<std::uint64_t, double> best_scores_by_seed(const MetricsFile& file, SeriesKind kind) {
    std::map<std::uint64_t, std::map<long, double>> best;
    for (const auto& r : file.rows) {
        const bool joint = r.agent == kJointAgent;
        if ((kind == SeriesKind::joint) != joint) {
            continue;
        }
        auto [it, fresh] = best[r.seed].try_emplace(r.agent, r.best_so_far);
        if (!fresh) {
            it->second = std::max(it->second, r.best_so_far);
        }
    }
    std::map<std::uint64_t, double> out;
    for (const auto& [seed, agents] : best) {
        double total = 0.0;
        for (const auto& [agent, v] : agents) {
            total += v;
        }
        out[seed] = total / static_cast<double>(agents.size());
    }
    return out;
}

SummaryLine summarize_series(const MetricsFile& file, SeriesKind kind, const std::string& source) {
    const auto scores = best_scores_by_seed(file, kind);
    SummaryLine line{source, kind == SeriesKind::joint ? "joint" : "agents", scores.size(),
                     std::numeric_limits<double>::quiet_NaN(), std::nullopt};
    if (scores.empty()) {
        return line;
    }
    double sum = 0.0;
    for (const auto& [seed, v] : scores) {
        sum += v;
    }
    const double n = static_cast<double>(scores.size());
    line.mean = sum / n;
    if (scores.size() > 1) {
        double ss = 0.0;
        for (const auto& [seed, v] : scores) {
            ss += (v - line.mean) * (v - line.mean);
        }
        const double sd = std::sqrt(ss / (n - 1.0));
        line.half_width = 1.96 * sd / std::sqrt(n);
    }
    return line;
}

void write_summary(std::ostream& out, const std::vector<SummaryLine>& lines) {
    out << "source,series,n_seeds,mean_best,ci95_low,ci95_high\n";
    for (const auto& l : lines) {
        out << l.source << ',' << l.series << ',' << l.n_seeds << ',' << format_double(l.mean) << ',';
        if (l.half_width) {
            out << format_double(l.mean - *l.half_width) << ','
                << format_double(l.mean + *l.half_width);
        } else {
            out << ',';
        }
        out << '\n';
    }
}

void write_relative_report(std::ostream& out, const RelativePerformance& report) {
    out << "# alignment: " << report.alignment << '\n';
    out << "# overall_percent: " << format_double(report.overall_percent) << '\n';
    out << "total_samples,a,b,percent\n";
    for (const auto& p : report.points) {
        out << p.total_samples << ',' << format_double(p.a) << ',' << format_double(p.b) << ','
            << format_double(p.percent) << '\n';
    }
}

}  // namespace ecc
