#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "atena/policy.hpp"

namespace atena::sal {

/// Per-episode entropy and state memories, filled during the rollout.
struct EpisodeMemory {
  std::vector<double> step_entropies;            // H(pi(.|o_t, I)), nats
  std::vector<std::vector<double>> step_states;  // s_t
  std::vector<int> nodes;                        // node at each step
  std::vector<std::size_t> actions;              // action taken at each step

  std::size_t size() const { return step_entropies.size(); }
};

EpisodeMemory memory_from_steps(std::span<const policy::StepCache> steps);

/// Affine self-prediction head f(s) = w . s + b; zero-initialized at test time.
struct SelfHead {
  std::vector<double> w;
  double b = 0.0;

  static SelfHead zeros(std::size_t hidden_dim) { return {std::vector<double>(hidden_dim, 0.0), 0.0}; }
  double logit(std::span<const double> state) const;
  bool all_finite() const;
};

enum class Source { Human, Agent };
std::string_view to_string(Source s);

struct OracleDecision {
  Source source = Source::Agent;
  double mean_entropy = 0.0;
  double threshold = 0.0;
};

/// Mean of the per-step policy entropies. Throws std::invalid_argument when empty.
double mean_entropy(const EpisodeMemory& memory);

/// Human iff mean_entropy > delta (strict).
Source route_oracle(double mean_entropy, double delta);
OracleDecision decide(const EpisodeMemory& memory, double delta);

std::vector<double> average_state(const EpisodeMemory& memory);

double sigmoid(double x);

/// f(s_avg).
double self_logit(const SelfHead& head, const EpisodeMemory& memory);

/// sigma(f(s_avg)) > 0.5, i.e. f(s_avg) > 0.
bool self_predict(const SelfHead& head, const EpisodeMemory& memory);

/// Binary cross-entropy in logit form: softplus(f) - y f.
double bce_from_logit(double logit, bool label);
double self_loss(const SelfHead& head, const EpisodeMemory& memory, bool label);

struct SelfLossGradient {
  double d_logit = 0.0;               // sigma(f) - y
  std::vector<double> d_w;            // d_logit * s_avg
  double d_b = 0.0;                   // d_logit
  std::vector<double> d_state_avg;    // d_logit * w
};

SelfLossGradient self_loss_gradient(const SelfHead& head, const EpisodeMemory& memory, bool label);

/// L = L_mix + gamma * L_self.
double total_loss(double l_mix, double l_self, double gamma);

struct Hyperparameters {
  double lambda = 0.4;  // mixture weight
  double delta = 0.1;   // uncertainty threshold, nats
  double gamma = 1.0;   // self-loss weight
  double eta = 5e-3;    // step size
};

void validate(const Hyperparameters& h);

/// Parameters owned by one adaptation run.
struct AdaptationState {
  policy::PolicyParams policy;
  SelfHead head;
  Hyperparameters hyper;
  std::uint64_t episodes_seen = 0;
};

AdaptationState make_state(policy::PolicyParams pretrained, const Hyperparameters& hyper);

}  // namespace atena::sal
