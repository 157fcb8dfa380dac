#include "atena/sal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "atena/errors.hpp"
#include "atena/meo.hpp"

namespace atena::sal {

EpisodeMemory memory_from_steps(std::span<const policy::StepCache> steps) {
  EpisodeMemory m;
  for (const auto& s : steps) {
    m.step_entropies.push_back(meo::entropy(s.dist.probs));
    m.step_states.push_back(s.hidden.state);
    m.nodes.push_back(s.node);
    m.actions.push_back(s.selected);
  }
  return m;
}

double SelfHead::logit(std::span<const double> state) const {
  ATENA_REQUIRE(state.size() == w.size(), "self head: state dimension mismatch");
  double f = b;
  for (std::size_t i = 0; i < w.size(); ++i) f += w[i] * state[i];
  return f;
}

bool SelfHead::all_finite() const {
  return std::isfinite(b) && std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); });
}

std::string_view to_string(Source s) { return s == Source::Human ? "human" : "agent"; }

double mean_entropy(const EpisodeMemory& memory) {
  if (memory.step_entropies.empty()) throw std::invalid_argument("mean_entropy: empty memory");
  double sum = 0.0;
  for (double h : memory.step_entropies) sum += h;
  return sum / static_cast<double>(memory.step_entropies.size());
}

Source route_oracle(double mean_entropy, double delta) {
  return mean_entropy > delta ? Source::Human : Source::Agent;
}

OracleDecision decide(const EpisodeMemory& memory, double delta) {
  const double h = mean_entropy(memory);
  return {route_oracle(h, delta), h, delta};
}

std::vector<double> average_state(const EpisodeMemory& memory) {
  if (memory.step_states.empty()) throw std::invalid_argument("average_state: empty memory");
  std::vector<double> avg(memory.step_states.front().size(), 0.0);
  for (const auto& s : memory.step_states)
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += s[i];
  for (auto& v : avg) v /= static_cast<double>(memory.step_states.size());
  return avg;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double self_logit(const SelfHead& head, const EpisodeMemory& memory) {
  return head.logit(average_state(memory));
}

bool self_predict(const SelfHead& head, const EpisodeMemory& memory) {
  return sigmoid(self_logit(head, memory)) > 0.5;
}

double bce_from_logit(double logit, bool label) {
  // softplus(f) = max(f, 0) + log1p(exp(-|f|))
  const double softplus = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
  return softplus - (label ? logit : 0.0);
}

double self_loss(const SelfHead& head, const EpisodeMemory& memory, bool label) {
  return bce_from_logit(self_logit(head, memory), label);
}

SelfLossGradient self_loss_gradient(const SelfHead& head, const EpisodeMemory& memory, bool label) {
  const auto s_avg = average_state(memory);
  SelfLossGradient g;
  g.d_logit = sigmoid(head.logit(s_avg)) - (label ? 1.0 : 0.0);
  g.d_w.resize(s_avg.size());
  g.d_state_avg.resize(s_avg.size());
  for (std::size_t i = 0; i < s_avg.size(); ++i) {
    g.d_w[i] = g.d_logit * s_avg[i];
    g.d_state_avg[i] = g.d_logit * head.w[i];
  }
  g.d_b = g.d_logit;
  return g;
}

double total_loss(double l_mix, double l_self, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("total_loss: gamma must be >= 0");
  return l_mix + gamma * l_self;
}

void validate(const Hyperparameters& h) {
  if (!(h.lambda >= 0.0 && h.lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
  if (!(h.delta >= 0.0)) throw ConfigError("delta must be >= 0");
  if (!(h.gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (!(h.eta >= 0.0)) throw ConfigError("eta must be >= 0");
}

AdaptationState make_state(policy::PolicyParams pretrained, const Hyperparameters& hyper) {
  validate(hyper);
  AdaptationState st;
  st.head = SelfHead::zeros(pretrained.hidden_dim());
  st.policy = std::move(pretrained);
  st.hyper = hyper;
  return st;
}

}  // namespace atena::sal
