#pragma once

#include <span>
#include <vector>

#include "atena/policy.hpp"

namespace atena::meo {

/// q_mix(a) = lambda * [a == selected] + (1 - lambda) * pi(a).
/// Throws std::invalid_argument for lambda outside [0, 1].
std::vector<double> mixture_distribution(std::span<const double> pi, std::size_t selected,
                                         double lambda);

/// Shannon entropy in nats, with 0 ln 0 = 0.
double entropy(std::span<const double> dist);

/// dH(q_mix)/d logits, holding the one-hot pseudo-expert fixed.
std::vector<double> mixture_entropy_logit_grad(std::span<const double> pi, std::size_t selected,
                                               double lambda);

struct EpisodeEntropy {
  std::vector<double> per_step;  // H(q_mix) per step, nats
  double mean = 0.0;
};

/// Mixture entropy of every step, pseudo-expert anchored at each step's
/// selected action.
EpisodeEntropy episode_mixture_entropy(std::span<const policy::StepCache> steps, double lambda);

/// L_mix = I * H' - (1 - I) * H'.
double mixture_loss(std::span<const policy::StepCache> steps, double lambda, bool success);

/// Per-step logit gradients of L_mix; inputs for policy::backward.
std::vector<std::vector<double>> mixture_loss_logit_grads(std::span<const policy::StepCache> steps,
                                                          double lambda, bool success);

/// Exact gradient of L_mix with respect to the policy parameters.
policy::ParamGradient mixture_loss_gradient(const policy::PolicyParams& params,
                                            std::span<const policy::StepCache> steps,
                                            double lambda, bool success);

}  // namespace atena::meo
