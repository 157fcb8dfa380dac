#include "atena/adapt.hpp"

#include <string>

#include "atena/errors.hpp"
#include "atena/meo.hpp"

namespace atena::sal {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::none: return "none";
    case Method::entropy_min: return "entropy_min";
    case Method::entropy_min_al: return "entropy_min_al";
    case Method::meo_al: return "meo_al";
    case Method::atena: return "atena";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  for (auto m : {Method::none, Method::entropy_min, Method::entropy_min_al, Method::meo_al,
                 Method::atena}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

bool uses_feedback(Method m) {
  return m == Method::entropy_min_al || m == Method::meo_al || m == Method::atena;
}

oracle::FeedbackRequest make_request(const env::GraphWorld& world, const env::Task& task,
                                     std::span<const int> nodes, double mean_entropy,
                                     double threshold, std::uint64_t episode_id) {
  oracle::FeedbackRequest r;
  r.episode_id = episode_id;
  r.instruction = task.instruction;
  r.trajectory.assign(nodes.begin(), nodes.end());
  for (int n : nodes) r.positions.push_back(world.node(n).position);
  r.start = task.start;
  r.goal = task.goal;
  r.mean_entropy = mean_entropy;
  r.threshold = threshold;
  return r;
}

metrics::EpisodeRecord adapt_episode(AdaptationState& state, const env::GraphWorld& world,
                                     const env::Task& task, oracle::HumanOracle& human,
                                     const EpisodeInfo& info, const AdaptOptions& options) {
  const auto& hp = state.hyper;
  const Method method = options.method;
  const auto roll = policy::rollout(state.policy, world, task);
  const auto memory = memory_from_steps(roll.steps);

  metrics::EpisodeRecord rec;
  rec.episode_id = info.episode_id;
  rec.seed = info.seed;
  rec.world_index = info.world_index;
  rec.start = task.start;
  rec.goal = task.goal;
  rec.trajectory = roll.nodes;
  rec.stopped = roll.stopped;
  rec.step_entropies = memory.step_entropies;
  rec.mean_entropy = mean_entropy(memory);
  rec.metrics = metrics::episode_metrics(world, task, roll.nodes, roll.stopped);
  rec.true_success = rec.metrics.success;

  const bool vanilla = method == Method::entropy_min || method == Method::entropy_min_al;
  const double lambda = vanilla ? 0.0 : hp.lambda;
  rec.step_mix_entropies = meo::episode_mixture_entropy(roll.steps, lambda).per_step;
  ++state.episodes_seen;

  if (method == Method::none) return rec;

  std::optional<bool> label;
  const bool agent_verdict = self_predict(state.head, memory);
  if (method == Method::entropy_min) {
    label = true;  // unconditional minimization
  } else {
    const bool to_human = info.force_human.value_or(
        route_oracle(rec.mean_entropy, hp.delta) == Source::Human);
    rec.route = to_human ? "human" : "agent";
    if (method == Method::atena) rec.self_prediction = agent_verdict;
    if (to_human) {
      auto request =
          make_request(world, task, roll.nodes, rec.mean_entropy, hp.delta, info.episode_id);
      request.stopped = roll.stopped;
      request.world_index = info.world_index;
      const oracle::FeedbackContext ctx{world, task, roll.final_node, roll.stopped, agent_verdict};
      const auto answer = human.query(request, ctx);
      label = answer.success;
      rec.source = answer.fallback ? "agent(fallback)" : "human";
    } else if (method == Method::atena) {
      label = agent_verdict;
      rec.source = "agent";
    }
  }
  if (!label) return rec;
  rec.label_used = label;

  rec.l_mix = meo::mixture_loss(roll.steps, lambda, *label);
  auto d_logits = meo::mixture_loss_logit_grads(roll.steps, lambda, *label);

  std::vector<std::vector<double>> d_states;
  std::optional<SelfLossGradient> self_grad;
  if (method == Method::atena) {
    rec.l_self = self_loss(state.head, memory, *label);
    self_grad = self_loss_gradient(state.head, memory, *label);
    if (options.self_loss_to_policy) {
      // s_avg is the mean of s_t, so each step receives 1/T of dL/ds_avg.
      const double per_step = hp.gamma / static_cast<double>(roll.steps.size());
      std::vector<double> ds(self_grad->d_state_avg.size());
      for (std::size_t i = 0; i < ds.size(); ++i) ds[i] = per_step * self_grad->d_state_avg[i];
      d_states.assign(roll.steps.size(), ds);
    }
  }
  rec.l_total = total_loss(rec.l_mix, rec.l_self, hp.gamma);

  const auto grad = policy::backward(state.policy, roll.steps, d_logits, d_states);
  state.policy.axpy(-hp.eta, grad);
  if (self_grad) {
    for (std::size_t i = 0; i < state.head.w.size(); ++i)
      state.head.w[i] -= hp.eta * hp.gamma * self_grad->d_w[i];
    state.head.b -= hp.eta * hp.gamma * self_grad->d_b;
  }
  ATENA_REQUIRE(state.policy.all_finite() && state.head.all_finite(),
                "adapt_episode: parameters became non-finite");
  rec.updated = true;
  return rec;
}

}  // namespace atena::sal
