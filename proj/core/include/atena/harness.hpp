#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atena/adapt.hpp"
#include "atena/envgraph.hpp"
#include "atena/metrics.hpp"
#include "atena/policy.hpp"
#include "atena/sal.hpp"

namespace atena::harness {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "atena-0.1.0";

/// Which episodes get routed to the human oracle.
///   uncertainty    mean policy entropy > delta
///   random_k       k episodes drawn uniformly from the stream
///   consecutive_k  the first k episodes of the stream
///   all            every episode
enum class Sampling { uncertainty, random_k, consecutive_k, all };
std::string_view to_string(Sampling s);
Sampling sampling_from_string(std::string_view name);

struct ExperimentConfig {
  // worlds
  int n_nodes = 40;
  int feature_dim = 16;
  double connectivity = 0.25;
  double code_width = 0.8;           // landmark RBF width, fraction of extent / sqrt(F)
  double node_feature_noise = 0.05;  // per-node noise on the landmark code
  double landmark_weight = 0.0;      // share of path landmarks in the instruction
  int n_seen_worlds = 8;
  int n_test_worlds = 8;
  int tasks_per_seen_world = 40;
  int episodes_per_world = 25;
  double success_radius = 3.0;
  int min_hops = 3;  // shortest-path hop range of generated tasks
  int max_hops = 8;
  int max_steps = 20;
  env::ShiftParams shift{0.05, 0.1, 0.15};

  // pretraining
  std::size_t hidden_dim = 16;
  int bc_epochs = 400;
  double bc_learning_rate = 0.5;
  double bc_momentum = 0.9;
  double bc_weight_decay = 0.0;
  std::string policy_checkpoint;  // load instead of pretraining when set; "{seed}" expands

  // adaptation
  sal::Method method = sal::Method::atena;
  Sampling sampling = Sampling::uncertainty;
  int sample_k = -1;  // -1: match the uncertainty rule's realized human count
  sal::Hyperparameters hyper{0.4, 0.6, 1.0, 0.1};
  bool self_loss_to_policy = true;

  // oracle
  std::string oracle = "ground_truth";  // ground_truth | interactive
  double noise_rate = 0.0;
  double interactive_timeout_s = 0.0;  // <= 0 waits forever

  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::string out_dir = "runs";
};

/// Throws ConfigError when the configuration is inconsistent.
void validate(const ExperimentConfig& config);

nlohmann::ordered_json to_json(const ExperimentConfig& config);
/// Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies `key=value`; the value is parsed as JSON, falling back to a string.
void apply_override(ExperimentConfig& config, const std::string& assignment);
void set_field(ExperimentConfig& config, const std::string& key, const nlohmann::json& value);
bool has_field(const std::string& key);

/// Worlds and tasks for one seed; a pure function of (config, seed).
struct Suite {
  std::vector<env::GraphWorld> seen_worlds;
  std::vector<std::vector<env::Task>> seen_tasks;
  std::vector<env::GraphWorld> test_worlds;
  std::vector<std::vector<env::Task>> test_tasks;
};

Suite build_suite(const ExperimentConfig& config, std::uint64_t seed);

/// Behavior-cloned policy for (config, seed); memoized per process.
policy::PolicyParams pretrained_policy(const ExperimentConfig& config, std::uint64_t seed,
                                       const Suite& suite);

struct RunTiming {
  double pretrain_s = 0.0;
  double adapt_s = 0.0;
  double per_episode_ms = 0.0;
};

struct RunResult {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  std::vector<metrics::EpisodeRecord> records;
  metrics::RunReport report;
  std::size_t sample_k = 0;  // realized human budget for random_k / consecutive_k
  RunTiming timing;
};

/// Called after every episode; used by the server for live status.
using EpisodeObserver = std::function<void(const metrics::EpisodeRecord&, const env::GraphWorld&)>;

/// One experiment run with the ground-truth oracle (or `human` when given).
RunResult run(const ExperimentConfig& config, std::uint64_t seed,
              oracle::HumanOracle* human = nullptr, const EpisodeObserver& observer = {});

/// Writes episodes.jsonl, report.json, config.json and the timing sidecar.
void write_run(const RunResult& result, const std::filesystem::path& dir);

/// Byte content of episodes.jsonl for a run.
std::string episodes_jsonl(const RunResult& result);

struct SweepCell {
  std::map<std::string, nlohmann::json> assignment;
  std::vector<metrics::RunReport> reports;  // one per seed
  bool flagged = false;                     // lambda = 1: zero mixture gradient
};

using SweepGrid = std::vector<std::pair<std::string, std::vector<nlohmann::json>>>;

/// Cross product of grid cells x config.seeds; throws ConfigError for grid
/// keys that are not config fields.
std::vector<SweepCell> sweep(const ExperimentConfig& config, const SweepGrid& grid,
                             unsigned threads = 0);

/// Mean and sample standard deviation over seeds, one row per cell.
std::string sweep_csv(const SweepGrid& grid, const std::vector<SweepCell>& cells);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

/// Reads report.json/config.json pairs below each path and prints per-method
/// tables. Writes summary.csv and summary.json into `out_dir` when non-empty.
std::string report(const std::vector<std::filesystem::path>& run_paths,
                   const std::filesystem::path& out_dir);

}  // namespace atena::harness
