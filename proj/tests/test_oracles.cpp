#include <gtest/gtest.h>

#include <thread>

#include "atena/oracles.hpp"
#include "support.hpp"

using namespace atena;
namespace ref = atena::oracle_ref;

namespace {

struct Fixture {
  env::GraphWorld world = ref::path_world(8);
  env::Task task;
  Fixture() {
    task.start = 0;
    task.goal = 6;
    task.success_radius = 1.0;
    task.instruction = {0.0, 0.0};
  }
};

sal::EpisodeMemory memory_with(std::vector<double> state) {
  sal::EpisodeMemory m;
  m.step_entropies = {0.5};
  m.step_states = {std::move(state)};
  m.nodes = {0};
  m.actions = {0};
  return m;
}

oracle::FeedbackRequest request(std::uint64_t id) {
  oracle::FeedbackRequest r;
  r.episode_id = id;
  r.trajectory = {0, 1};
  return r;
}

}  // namespace

TEST(GroundTruth, NoiseFreeEqualsSuccess) {
  Fixture f;
  Rng rng(1);
  for (int node = 0; node < 8; ++node)
    for (bool stopped : {true, false}) {
      const bool expected = stopped && env::is_success(f.world, node, f.task);
      EXPECT_EQ(oracle::ground_truth_feedback(f.world, f.task, node, stopped, 0.0, rng), expected);
    }
  EXPECT_TRUE(oracle::ground_truth_feedback(f.world, f.task, 5, true, 0.0, rng));
  EXPECT_FALSE(oracle::ground_truth_feedback(f.world, f.task, 4, true, 0.0, rng));
  EXPECT_FALSE(oracle::ground_truth_feedback(f.world, f.task, 6, false, 0.0, rng));
}

TEST(GroundTruth, FullNoiseNegates) {
  Fixture f;
  Rng rng(2);
  for (int node = 0; node < 8; ++node)
    EXPECT_NE(oracle::ground_truth_feedback(f.world, f.task, node, true, 1.0, rng),
              env::is_success(f.world, node, f.task));
}

TEST(GroundTruth, HalfNoiseFlipsHalf) {
  Fixture f;
  Rng rng(3);
  int flips = 0;
  for (int t = 0; t < 10000; ++t) flips += oracle::ground_truth_feedback(f.world, f.task, 6, true, 0.5, rng) ? 0 : 1;
  EXPECT_NEAR(flips / 10000.0, 0.5, 0.02);
}

TEST(GroundTruth, RejectsBadNoiseRate) {
  Fixture f;
  Rng rng(4);
  EXPECT_THROW(oracle::ground_truth_feedback(f.world, f.task, 6, true, -0.1, rng), std::invalid_argument);
  EXPECT_THROW(oracle::ground_truth_feedback(f.world, f.task, 6, true, 1.5, rng), std::invalid_argument);
  EXPECT_THROW(oracle::GroundTruthOracle(2.0, 0), std::invalid_argument);
}

TEST(GroundTruth, OracleIsSeeded) {
  Fixture f;
  oracle::GroundTruthOracle a(0.3, 9), b(0.3, 9);
  const oracle::FeedbackContext ctx{f.world, f.task, 6, true, false};
  for (int t = 0; t < 200; ++t) {
    const auto x = a.query(request(t), ctx);
    EXPECT_EQ(x.success, b.query(request(t), ctx).success);
    EXPECT_EQ(x.responder, oracle::Responder::ground_truth);
    EXPECT_FALSE(x.fallback);
  }
}

TEST(AgentFeedback, Examples) {
  const auto mem = memory_with({0.5, -0.5});
  EXPECT_FALSE(oracle::agent_feedback(sal::SelfHead::zeros(2), mem));
  EXPECT_TRUE(oracle::agent_feedback({{50.0, -50.0}, 0.0}, mem));
}

TEST(AgentFeedback, DelegatesToSelfPredict) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(4);
    for (auto& v : s) v = rng.uniform(-1, 1);
    sal::SelfHead head = sal::SelfHead::zeros(4);
    for (auto& v : head.w) v = rng.normal();
    head.b = rng.normal();
    const auto mem = memory_with(s);
    EXPECT_EQ(oracle::agent_feedback(head, mem), sal::self_predict(head, mem));
  }
}

TEST(Queue, FifoAndRoundTrip) {
  oracle::FeedbackQueue q;
  EXPECT_FALSE(q.pending().has_value());
  const auto a = q.enqueue(request(7));
  const auto b = q.enqueue(request(3));
  EXPECT_LT(a.created_at, b.created_at);
  EXPECT_EQ(q.pending()->episode_id, 7u);
  EXPECT_EQ(q.pending_count(), 2u);
  EXPECT_EQ(q.post({7, true, oracle::Responder::human}), oracle::PostStatus::accepted);
  EXPECT_EQ(q.pending()->episode_id, 3u);
  EXPECT_EQ(q.wait(7, 1.0), std::optional<bool>(true));
}

TEST(Queue, SecondResponseRejectedFirstWins) {
  oracle::FeedbackQueue q;
  q.enqueue(request(1));
  EXPECT_EQ(q.post({1, false, oracle::Responder::human}), oracle::PostStatus::accepted);
  EXPECT_EQ(q.post({1, true, oracle::Responder::human}), oracle::PostStatus::duplicate);
  EXPECT_EQ(q.wait(1, 1.0), std::optional<bool>(false));
}

TEST(Queue, UnknownEpisodeAndDuplicateIds) {
  oracle::FeedbackQueue q;
  EXPECT_EQ(q.post({99, true, oracle::Responder::human}), oracle::PostStatus::unknown_episode);
  q.enqueue(request(1));
  EXPECT_THROW(q.enqueue(request(1)), std::invalid_argument);
}

TEST(Queue, TimeoutWithdrawsRequest) {
  oracle::FeedbackQueue q;
  q.enqueue(request(4));
  EXPECT_FALSE(q.wait(4, 0.05).has_value());
  EXPECT_FALSE(q.pending().has_value());
  EXPECT_EQ(q.post({4, true, oracle::Responder::human}), oracle::PostStatus::duplicate);
}

TEST(Queue, CloseWakesWaiter) {
  oracle::FeedbackQueue q;
  q.enqueue(request(5));
  std::thread closer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    q.close();
  });
  EXPECT_FALSE(q.wait(5, 0.0).has_value());
  closer.join();
  EXPECT_TRUE(q.closed());
}

TEST(Interactive, ScriptedClientAnswers) {
  Fixture f;
  oracle::FeedbackQueue q;
  oracle::InteractiveOracle human(q, 1.0);
  std::thread client([&] {
    while (!q.pending()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    q.post({q.pending()->episode_id, true, oracle::Responder::human});
  });
  const auto answer = human.query(request(11), {f.world, f.task, 0, true, false});
  client.join();
  EXPECT_TRUE(answer.success);
  EXPECT_EQ(answer.responder, oracle::Responder::human);
  EXPECT_FALSE(answer.fallback);
  EXPECT_EQ(human.fallbacks(), 0u);
}

TEST(Interactive, TimeoutFallsBackToAgent) {
  Fixture f;
  oracle::FeedbackQueue q;
  oracle::InteractiveOracle human(q, 0.1);
  for (bool agent : {true, false}) {
    const auto answer = human.query(request(agent ? 1 : 2), {f.world, f.task, 0, true, agent});
    EXPECT_EQ(answer.success, agent);
    EXPECT_TRUE(answer.fallback);
    EXPECT_EQ(answer.responder, oracle::Responder::agent);
  }
  EXPECT_EQ(human.fallbacks(), 2u);
}

TEST(Json, RequestAndResponsePayloads) {
  auto r = request(12);
  r.positions = {{1.0, 2.0}, {3.0, 4.0}};
  r.mean_entropy = 0.75;
  const auto j = oracle::to_json(r);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["episode_id"], 12);
  EXPECT_EQ(j["positions"][1][0], 3.0);
  EXPECT_EQ(j["mean_entropy"], 0.75);
  for (const char* key : {"world_index", "start", "goal", "stopped", "trajectory", "instruction", "threshold",
                          "created_at"})
    EXPECT_TRUE(j.contains(key)) << key;

  const auto resp = oracle::to_json(oracle::FeedbackResponse{12, true, oracle::Responder::human});
  EXPECT_EQ(resp["schema_version"], 1);
  EXPECT_EQ(resp["responder"], "human");
  const auto back = oracle::response_from_json(nlohmann::json::parse(resp.dump()));
  EXPECT_EQ(back.episode_id, 12u);
  EXPECT_TRUE(back.success);
}

TEST(Json, MalformedResponsesRejected) {
  using nlohmann::json;
  EXPECT_THROW(oracle::response_from_json(json::array()), std::invalid_argument);
  EXPECT_THROW(oracle::response_from_json(json{{"success", true}}), std::invalid_argument);
  EXPECT_THROW(oracle::response_from_json(json{{"episode_id", -1}, {"success", true}}), std::invalid_argument);
  EXPECT_THROW(oracle::response_from_json(json{{"episode_id", 1}, {"success", "yes"}}), std::invalid_argument);
}
