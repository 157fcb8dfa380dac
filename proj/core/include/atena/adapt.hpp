#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "atena/envgraph.hpp"
#include "atena/metrics.hpp"
#include "atena/oracles.hpp"
#include "atena/sal.hpp"

namespace atena::sal {

/// Adaptation rule applied after each episode.
///   none            frozen policy
///   entropy_min     minimize mean H(pi) on every episode
///   entropy_min_al  signed mean H(pi) on human-labeled episodes only
///   meo_al          signed mixture entropy on human-labeled episodes only
///   atena           mixture entropy + self-prediction head on every episode
enum class Method { none, entropy_min, entropy_min_al, meo_al, atena };

std::string_view to_string(Method m);
/// Throws ConfigError on unknown names.
Method method_from_string(std::string_view name);
bool uses_feedback(Method m);

struct EpisodeInfo {
  std::uint64_t episode_id = 0;
  std::uint64_t seed = 0;
  int world_index = 0;
  /// Overrides the entropy routing rule (used by non-uncertainty sampling).
  std::optional<bool> force_human;
};

struct AdaptOptions {
  Method method = Method::atena;
  /// Let the self-prediction loss flow into the policy through s_avg.
  bool self_loss_to_policy = true;
};

/// Rolls out one episode greedily, routes it to the human oracle or the
/// agent, and applies exactly one gradient step (theta, phi) -= eta * grad L.
metrics::EpisodeRecord adapt_episode(AdaptationState& state, const env::GraphWorld& world,
                                     const env::Task& task, oracle::HumanOracle& human,
                                     const EpisodeInfo& info, const AdaptOptions& options = {});

/// The human-facing request for a finished rollout.
oracle::FeedbackRequest make_request(const env::GraphWorld& world, const env::Task& task,
                                     std::span<const int> nodes, double mean_entropy,
                                     double threshold, std::uint64_t episode_id);

}  // namespace atena::sal
