#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atena/envgraph.hpp"
#include "atena/rng.hpp"
#include "atena/sal.hpp"

namespace atena::oracle {

enum class Responder { ground_truth, agent, human };
std::string_view to_string(Responder r);

/// Everything a human needs to judge one episode.
struct FeedbackRequest {
  std::uint64_t episode_id = 0;
  int world_index = 0;
  std::vector<double> instruction;
  std::vector<int> trajectory;
  std::vector<env::Vec2> positions;
  int start = 0;
  int goal = 0;
  bool stopped = true;  // false when the episode was truncated
  double mean_entropy = 0.0;
  double threshold = 0.0;
  std::uint64_t created_at = 0;  // monotonic sequence number
};

struct FeedbackResponse {
  std::uint64_t episode_id = 0;
  bool success = false;
  Responder responder = Responder::human;
};

nlohmann::ordered_json to_json(const FeedbackRequest& r);
nlohmann::ordered_json to_json(const FeedbackResponse& r);
/// Throws std::invalid_argument with a reason on malformed payloads.
FeedbackResponse response_from_json(const nlohmann::json& j);

/// Benchmark outcome (truncation counts as failure), flipped with
/// probability noise_rate using one draw from `rng`.
bool ground_truth_feedback(const env::GraphWorld& world, const env::Task& task, int final_node,
                           bool stopped, double noise_rate, Rng& rng);

/// The agent's own verdict: sal::self_predict.
bool agent_feedback(const sal::SelfHead& head, const sal::EpisodeMemory& memory);

/// Extra context available to an oracle when the run asks for a label.
struct FeedbackContext {
  const env::GraphWorld& world;
  const env::Task& task;
  int final_node = 0;
  bool stopped = false;
  bool agent_prediction = false;  // fallback verdict
};

struct OracleAnswer {
  bool success = false;
  Responder responder = Responder::human;
  bool fallback = false;  // the human channel timed out and the agent answered
};

/// Backend for the human side of routing.
class HumanOracle {
 public:
  virtual ~HumanOracle() = default;
  virtual OracleAnswer query(const FeedbackRequest& request, const FeedbackContext& context) = 0;
};

/// Simulated human: the benchmark success signal with optional label noise.
class GroundTruthOracle final : public HumanOracle {
 public:
  GroundTruthOracle(double noise_rate, std::uint64_t seed);
  OracleAnswer query(const FeedbackRequest& request, const FeedbackContext& context) override;

 private:
  double noise_rate_;
  Rng rng_;
};

enum class PostStatus { accepted, unknown_episode, duplicate };

/// FIFO of outstanding feedback requests shared between the run loop and the
/// HTTP handlers. At most one request per episode id; each id answered once.
class FeedbackQueue {
 public:
  /// Enqueues a request and stamps created_at.
  FeedbackRequest enqueue(FeedbackRequest request);

  /// Oldest unanswered request, if any.
  std::optional<FeedbackRequest> pending() const;
  std::size_t pending_count() const;

  PostStatus post(const FeedbackResponse& response);

  /// Blocks until the request for `episode_id` is answered, the timeout
  /// elapses or the queue is closed. A non-positive timeout waits forever.
  /// On timeout the request is withdrawn so late answers are rejected.
  std::optional<bool> wait(std::uint64_t episode_id, double timeout_s);

  /// Wakes every waiter; subsequent waits return immediately.
  void close();
  bool closed() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<FeedbackRequest> queue_;
  std::set<std::uint64_t> outstanding_;
  std::set<std::uint64_t> answered_;
  std::set<std::uint64_t> withdrawn_;
  std::vector<std::pair<std::uint64_t, bool>> responses_;
  std::uint64_t sequence_ = 0;
  bool closed_ = false;
};

/// Live human via the FeedbackQueue; falls back to the agent verdict when no
/// answer arrives in time.
class InteractiveOracle final : public HumanOracle {
 public:
  InteractiveOracle(FeedbackQueue& queue, double timeout_s) : queue_(queue), timeout_s_(timeout_s) {}
  OracleAnswer query(const FeedbackRequest& request, const FeedbackContext& context) override;

  std::size_t fallbacks() const { return fallbacks_; }

 private:
  FeedbackQueue& queue_;
  double timeout_s_;
  std::size_t fallbacks_ = 0;
};

}  // namespace atena::oracle
