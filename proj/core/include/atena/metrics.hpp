#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atena/envgraph.hpp"

namespace atena::metrics {

struct EpisodeMetrics {
  double tl = 0.0;  // trajectory length, meters
  double ne = 0.0;  // navigation error, meters
  bool success = false;
  bool oracle_success = false;
  double spl_term = 0.0;
};

/// `nodes` is the visited sequence starting at task.start. A truncated
/// episode (`stopped == false`) is a failure; NE is measured at its last node.
EpisodeMetrics episode_metrics(const env::GraphWorld& world, const env::Task& task,
                               std::span<const int> nodes, bool stopped);

/// One line of the episode log.
struct EpisodeRecord {
  std::uint64_t episode_id = 0;
  std::uint64_t seed = 0;
  int world_index = 0;
  int start = 0;
  int goal = 0;
  std::vector<int> trajectory;
  bool stopped = false;
  std::vector<double> step_entropies;      // H(pi) per step
  std::vector<double> step_mix_entropies;  // H(q_mix) per step
  double mean_entropy = 0.0;
  std::string route = "none";   // human | agent | none
  std::string source = "none";  // human | agent | agent(fallback) | none
  bool true_success = false;
  std::optional<bool> label_used;
  std::optional<bool> self_prediction;
  double l_mix = 0.0;
  double l_self = 0.0;
  double l_total = 0.0;
  bool updated = false;
  EpisodeMetrics metrics;

  std::size_t steps() const { return step_entropies.size(); }
  bool human_answered() const { return source == "human"; }
};

nlohmann::ordered_json to_json(const EpisodeRecord& r);

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  double accuracy() const {
    return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
  }
};

struct RunReport {
  std::size_t episodes = 0;
  double sr = 0.0;   // percent
  double osr = 0.0;  // percent
  double spl = 0.0;  // percent
  double tl = 0.0;
  double ne = 0.0;
  double active_episode_ratio = 0.0;
  double active_step_ratio = 0.0;
  std::size_t human_episodes = 0;
  std::size_t fallback_episodes = 0;
  std::size_t updates = 0;
  Confusion confusion;
  Confusion confusion_tail;  // last kTailEpisodes episodes with a self-prediction
};

inline constexpr std::size_t kTailEpisodes = 100;

/// Order-independent summary, except confusion_tail which follows log order.
RunReport aggregate(std::span<const EpisodeRecord> records);

nlohmann::ordered_json to_json(const RunReport& r);
std::string csv_header();
std::string csv_row(const RunReport& r);

}  // namespace atena::metrics
