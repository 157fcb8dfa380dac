#include "atena/oracles.hpp"

#include <algorithm>
#include <stdexcept>

namespace atena::oracle {

std::string_view to_string(Responder r) {
  switch (r) {
    case Responder::ground_truth: return "ground_truth";
    case Responder::agent: return "agent";
    case Responder::human: return "human";
  }
  return "unknown";
}

nlohmann::ordered_json to_json(const FeedbackRequest& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["episode_id"] = r.episode_id;
  j["world_index"] = r.world_index;
  j["start"] = r.start;
  j["goal"] = r.goal;
  j["stopped"] = r.stopped;
  j["trajectory"] = r.trajectory;
  auto& pos = j["positions"] = nlohmann::ordered_json::array();
  for (const auto& p : r.positions) pos.push_back({p.x, p.y});
  j["instruction"] = r.instruction;
  j["mean_entropy"] = r.mean_entropy;
  j["threshold"] = r.threshold;
  j["created_at"] = r.created_at;
  return j;
}

nlohmann::ordered_json to_json(const FeedbackResponse& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["episode_id"] = r.episode_id;
  j["success"] = r.success;
  j["responder"] = std::string(to_string(r.responder));
  return j;
}

FeedbackResponse response_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("body must be a JSON object");
  if (!j.contains("episode_id") || !j["episode_id"].is_number_unsigned())
    throw std::invalid_argument("episode_id must be a non-negative integer");
  if (!j.contains("success") || !j["success"].is_boolean())
    throw std::invalid_argument("success must be a boolean");
  FeedbackResponse r;
  r.episode_id = j["episode_id"].get<std::uint64_t>();
  r.success = j["success"].get<bool>();
  r.responder = Responder::human;
  return r;
}

bool ground_truth_feedback(const env::GraphWorld& world, const env::Task& task, int final_node,
                           bool stopped, double noise_rate, Rng& rng) {
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0))
    throw std::invalid_argument("noise_rate must be in [0, 1]");
  const bool truth = stopped && env::is_success(world, final_node, task);
  const bool flip = rng.bernoulli(noise_rate);
  return flip ? !truth : truth;
}

bool agent_feedback(const sal::SelfHead& head, const sal::EpisodeMemory& memory) {
  return sal::self_predict(head, memory);
}

GroundTruthOracle::GroundTruthOracle(double noise_rate, std::uint64_t seed)
    : noise_rate_(noise_rate), rng_(derive_seed(seed, "oracle/noise")) {
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0))
    throw std::invalid_argument("noise_rate must be in [0, 1]");
}

OracleAnswer GroundTruthOracle::query(const FeedbackRequest&, const FeedbackContext& context) {
  const bool label = ground_truth_feedback(context.world, context.task, context.final_node,
                                           context.stopped, noise_rate_, rng_);
  return {label, Responder::ground_truth, false};
}

FeedbackRequest FeedbackQueue::enqueue(FeedbackRequest request) {
  std::lock_guard lock(mu_);
  if (outstanding_.count(request.episode_id) || answered_.count(request.episode_id) ||
      withdrawn_.count(request.episode_id))
    throw std::invalid_argument("feedback request ids must be unique");
  request.created_at = sequence_++;
  outstanding_.insert(request.episode_id);
  queue_.push_back(request);
  return request;
}

std::optional<FeedbackRequest> FeedbackQueue::pending() const {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  return queue_.front();
}

std::size_t FeedbackQueue::pending_count() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

PostStatus FeedbackQueue::post(const FeedbackResponse& response) {
  {
    std::lock_guard lock(mu_);
    const auto id = response.episode_id;
    if (answered_.count(id) || withdrawn_.count(id)) return PostStatus::duplicate;
    if (!outstanding_.count(id)) return PostStatus::unknown_episode;
    outstanding_.erase(id);
    answered_.insert(id);
    queue_.erase(std::remove_if(queue_.begin(), queue_.end(),
                                [&](const FeedbackRequest& r) { return r.episode_id == id; }),
                 queue_.end());
    responses_.emplace_back(id, response.success);
  }
  cv_.notify_all();
  return PostStatus::accepted;
}

std::optional<bool> FeedbackQueue::wait(std::uint64_t episode_id, double timeout_s) {
  std::unique_lock lock(mu_);
  auto answered = [&]() -> std::optional<bool> {
    for (const auto& [id, ok] : responses_)
      if (id == episode_id) return ok;
    return std::nullopt;
  };
  auto ready = [&] { return closed_ || answered().has_value(); };
  if (timeout_s > 0.0) {
    cv_.wait_for(lock, std::chrono::duration<double>(timeout_s), ready);
  } else {
    cv_.wait(lock, ready);
  }
  if (auto r = answered()) {
    std::erase_if(responses_, [&](const auto& p) { return p.first == episode_id; });
    return r;
  }
  // Timed out or closed: withdraw the request.
  if (outstanding_.erase(episode_id)) {
    withdrawn_.insert(episode_id);
    queue_.erase(std::remove_if(queue_.begin(), queue_.end(),
                                [&](const FeedbackRequest& r) { return r.episode_id == episode_id; }),
                 queue_.end());
  }
  return std::nullopt;
}

void FeedbackQueue::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool FeedbackQueue::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

OracleAnswer InteractiveOracle::query(const FeedbackRequest& request, const FeedbackContext& context) {
  const auto queued = queue_.enqueue(request);
  if (auto answer = queue_.wait(queued.episode_id, timeout_s_)) {
    return {*answer, Responder::human, false};
  }
  ++fallbacks_;
  return {context.agent_prediction, Responder::agent, true};
}

}  // namespace atena::oracle
