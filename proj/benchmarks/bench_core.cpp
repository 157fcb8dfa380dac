#include <benchmark/benchmark.h>

#include "atena/adapt.hpp"
#include "atena/meo.hpp"

using namespace atena;

namespace {

struct Fixture {
  env::GraphWorld world = env::generate_world(7, 40, 16, 0.25);
  env::Task task;
  policy::PolicyParams params = policy::PolicyParams::random(16, 16, 3, 0.3);
  Fixture() {
    env::TaskStyle ts;
    task = env::generate_tasks(world, 1, 11, ts).front();
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

class Answer final : public oracle::HumanOracle {
 public:
  oracle::OracleAnswer query(const oracle::FeedbackRequest&, const oracle::FeedbackContext&) override {
    return {true, oracle::Responder::human, false};
  }
};

}  // namespace

static void BM_Softmax(benchmark::State& state) {
  std::vector<double> logits(state.range(0));
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = 0.1 * static_cast<double>(i % 7);
  for (auto _ : state) benchmark::DoNotOptimize(policy::softmax(logits));
}
BENCHMARK(BM_Softmax)->Arg(4)->Arg(8)->Arg(32);

static void BM_MixtureLogitGrad(benchmark::State& state) {
  const auto pi = policy::softmax(std::vector<double>{0.1, 0.5, -0.3, 1.2, 0.0, 0.4});
  for (auto _ : state) benchmark::DoNotOptimize(meo::mixture_entropy_logit_grad(pi, 3, 0.4));
}
BENCHMARK(BM_MixtureLogitGrad);

static void BM_Encode(benchmark::State& state) {
  const auto& f = fixture();
  const auto x = f.world.features(0);
  const std::vector<double> h(x.size(), 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(policy::encode(f.params, f.task.instruction, x, h));
}
BENCHMARK(BM_Encode);

static void BM_Rollout(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(policy::rollout(f.params, f.world, f.task));
}
BENCHMARK(BM_Rollout);

static void BM_Backward(benchmark::State& state) {
  const auto& f = fixture();
  const auto roll = policy::rollout(f.params, f.world, f.task);
  const auto d_logits = meo::mixture_loss_logit_grads(roll.steps, 0.4, true);
  for (auto _ : state) benchmark::DoNotOptimize(policy::backward(f.params, roll.steps, d_logits, {}));
}
BENCHMARK(BM_Backward);

static void BM_AdaptEpisode(benchmark::State& state) {
  const auto& f = fixture();
  auto s = sal::make_state(f.params, {0.4, 0.0, 1.0, 1e-4});
  Answer human;
  for (auto _ : state) benchmark::DoNotOptimize(sal::adapt_episode(s, f.world, f.task, human, {}, {sal::Method::atena}));
}
BENCHMARK(BM_AdaptEpisode);
BENCHMARK_MAIN();
