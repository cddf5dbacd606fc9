#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecc/ensemble.hpp"
#include "ecc/envs.hpp"

namespace ecc {

/// Invalid experiment configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Algorithm { cdrl, ecc };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

struct ExperimentConfig {
    Algorithm algorithm = Algorithm::ecc;
    /// Built-in env name; ignored when `env_file` is set.
    std::string env = "two_path";
    std::string env_file;
    /// For cdrl, `train.k` independent single agents are trained per seed.
    EccConfig train = EccConfig::with_defaults(20000);
    std::size_t n_seeds = 1;
    /// Seeds are first_seed, first_seed + 1, ...
    std::uint64_t first_seed = 0;
    std::size_t eval_period = 1000;
    std::size_t eval_episodes = 10;
    double eval_epsilon = 0.001;
    std::string output = "metrics.csv";
    /// Directory for per-agent final checkpoints; empty disables them.
    std::string checkpoint_dir;
    /// Concurrent seed jobs; 0 uses the hardware concurrency.
    std::size_t jobs = 0;
};

/// Applies the keys of a JSON config object on top of `cfg`.
void apply_config_json(const std::string& json_text, ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);
EnvSpec resolve_env(const ExperimentConfig& cfg);

struct MetricRow {
    std::uint64_t seed;
    std::size_t step;
    std::size_t total_samples;
    /// Agent index, or -1 for the average joint policy.
    long agent;
    double mean_return;
    double best_so_far;
    std::uint64_t snapshot_version;

    bool operator==(const MetricRow&) const = default;
};

inline constexpr long kJointAgent = -1;

struct MetricsFile {
    std::map<std::string, std::string> meta;
    std::vector<MetricRow> rows;
};

inline constexpr const char* kCsvColumns =
    "seed,step,total_samples,agent,mean_return,best_so_far,snapshot_version";

/// First line: `# ecc-metrics v1 key=value ...`; second line: the column
/// header; then one row per line.
void write_metrics_csv(std::ostream& out, const MetricsFile& file);
MetricsFile read_metrics_csv(std::istream& in);
MetricsFile read_metrics_csv_file(const std::string& path);
std::string format_row(const MetricRow& row);

/// Metric rows of one seed, sorted by step then agent with the joint row last.
std::vector<MetricRow> run_seed(const ExperimentConfig& cfg, const EnvSpec& env,
                                std::uint64_t seed, const std::atomic<bool>* stop = nullptr);

struct ExperimentResult {
    MetricsFile metrics;
    bool interrupted = false;
};

/// Trains and evaluates every seed, then writes the merged CSV to
/// `cfg.output`. Each seed streams into `<output>.seed<N>.part`; parts are
/// merged in seed order and removed. When `stop` becomes true the jobs end
/// at the next step and whatever was recorded is merged.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::atomic<bool>* stop = nullptr);

enum class SeriesKind { joint, agents };

struct CurvePoint {
    std::size_t total_samples;
    double value;
};

/// Mean over seeds at each evaluation point. `agents` averages the agent
/// rows of each seed first.
std::vector<CurvePoint> extract_curve(const MetricsFile& file, SeriesKind kind);

/// Trailing moving average over `window` evaluation points.
std::vector<CurvePoint> smooth(const std::vector<CurvePoint>& curve, std::size_t window);

struct RatioPoint {
    std::size_t total_samples;
    double a;
    double b;
    double percent;
};

struct RelativePerformance {
    std::vector<RatioPoint> points;
    /// 100 * mean(a) / mean(b) over the compared horizon.
    double overall_percent;
    std::string alignment;
};

/// Aligns curve b onto a's sample counts with last-observation-carried-
/// forward, up to the shorter horizon. Equal values give exactly 100%.
RelativePerformance relative_sample_performance(const std::vector<CurvePoint>& a,
                                                const std::vector<CurvePoint>& b);
RelativePerformance relative_sample_performance(const MetricsFile& a, SeriesKind a_kind,
                                                const MetricsFile& b, SeriesKind b_kind,
                                                std::size_t smooth_window = 0);

/// Copy of a run relabelled as a k-agent ensemble whose agents all behaved
/// like the original: same scores per step, k samples consumed per step.
MetricsFile as_correlated_ensemble(const MetricsFile& single, std::size_t k);

struct SummaryLine {
    std::string source;
    std::string series;
    std::size_t n_seeds;
    double mean;
    /// 1.96 * sample standard error; absent with a single seed.
    std::optional<double> half_width;
};

/// Best score per seed: `joint` uses the joint row, `agents` averages each
/// agent's best. Then the mean and 95% interval across seeds.
SummaryLine summarize_series(const MetricsFile& file, SeriesKind kind, const std::string& source);

/// Per-seed best scores used by summarize_series.
std::map<std::uint64_t, double> best_scores_by_seed(const MetricsFile& file, SeriesKind kind);

void write_summary(std::ostream& out, const std::vector<SummaryLine>& lines);
void write_relative_report(std::ostream& out, const RelativePerformance& report);

}  // namespace ecc
