#include "atena/meo.hpp"

#include <cmath>
#include <stdexcept>

#include "atena/errors.hpp"

namespace atena::meo {

namespace {

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("mixture weight lambda must be in [0, 1]");
}

}  // namespace

std::vector<double> mixture_distribution(std::span<const double> pi, std::size_t selected,
                                         double lambda) {
  check_lambda(lambda);
  ATENA_REQUIRE(selected < pi.size(), "mixture_distribution: selected index out of range");
  std::vector<double> q(pi.size());
  for (std::size_t a = 0; a < pi.size(); ++a) q[a] = (1.0 - lambda) * pi[a];
  q[selected] += lambda;
  return q;
}

double entropy(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

std::vector<double> mixture_entropy_logit_grad(std::span<const double> pi, std::size_t selected,
                                               double lambda) {
  // dH/dz_j = -(1 - lambda) * pi_j * (ln q_j - sum_a pi_a ln q_a)
  const auto q = mixture_distribution(pi, selected, lambda);
  if (lambda == 1.0) return std::vector<double>(pi.size(), 0.0);  // q is constant
  std::vector<double> log_q(q.size(), 0.0);
  double expected = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (q[a] > 0.0) {
      log_q[a] = std::log(q[a]);
      expected += pi[a] * log_q[a];
    }
  }
  std::vector<double> g(pi.size());
  for (std::size_t j = 0; j < pi.size(); ++j)
    g[j] = q[j] > 0.0 ? -(1.0 - lambda) * pi[j] * (log_q[j] - expected) : 0.0;
  return g;
}

EpisodeEntropy episode_mixture_entropy(std::span<const policy::StepCache> steps, double lambda) {
  check_lambda(lambda);
  EpisodeEntropy e;
  e.per_step.reserve(steps.size());
  for (const auto& s : steps) {
    e.per_step.push_back(entropy(mixture_distribution(s.dist.probs, s.selected, lambda)));
    e.mean += e.per_step.back();
  }
  if (!steps.empty()) e.mean /= static_cast<double>(steps.size());
  return e;
}

double mixture_loss(std::span<const policy::StepCache> steps, double lambda, bool success) {
  if (steps.empty()) throw std::invalid_argument("mixture_loss: empty episode");
  const double h = episode_mixture_entropy(steps, lambda).mean;
  const double indicator = success ? 1.0 : 0.0;
  return indicator * h - (1.0 - indicator) * h;
}

std::vector<std::vector<double>> mixture_loss_logit_grads(std::span<const policy::StepCache> steps,
                                                          double lambda, bool success) {
  if (steps.empty()) throw std::invalid_argument("mixture_loss: empty episode");
  check_lambda(lambda);
  const double sign = success ? 1.0 : -1.0;
  const double weight = sign / static_cast<double>(steps.size());
  std::vector<std::vector<double>> out;
  out.reserve(steps.size());
  for (const auto& s : steps) {
    auto g = mixture_entropy_logit_grad(s.dist.probs, s.selected, lambda);
    for (auto& v : g) v *= weight;
    out.push_back(std::move(g));
  }
  return out;
}

policy::ParamGradient mixture_loss_gradient(const policy::PolicyParams& params,
                                            std::span<const policy::StepCache> steps,
                                            double lambda, bool success) {
  const auto d_logits = mixture_loss_logit_grads(steps, lambda, success);
  return policy::backward(params, steps, d_logits);
}

}  // namespace atena::meo
