#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "atena/envgraph.hpp"

namespace atena::policy {

/// Edge lengths enter the scorer in units of 10 m.
inline constexpr double kLengthScale = 0.1;
/// Weight of the visited-node mean subtracted from the current features.
inline constexpr double kHistoryWeight = 0.5;

/// Flat parameter vector for the tanh encoder and bilinear action scorer.
///
/// Layout: W_enc (D x (2F+1), row-major) | b_enc (D) | W_act (D x (F+2), row-major).
/// The encoder input is [instruction ; current - kHistoryWeight * history ; 1]
/// and a candidate input is [features ; length * kLengthScale ; 1].
class PolicyParams {
 public:
  PolicyParams() = default;
  PolicyParams(std::size_t hidden_dim, std::size_t feature_dim);

  /// Seeded uniform initialization in [-scale, scale].
  static PolicyParams random(std::size_t hidden_dim, std::size_t feature_dim, std::uint64_t seed,
                             double scale = 0.1);

  std::size_t hidden_dim() const { return hidden_; }
  std::size_t feature_dim() const { return features_; }
  std::size_t encoder_cols() const { return 2 * features_ + 1; }
  std::size_t scorer_cols() const { return features_ + 2; }
  std::size_t size() const { return data_.size(); }

  double& enc(std::size_t row, std::size_t col) { return data_[row * encoder_cols() + col]; }
  double enc(std::size_t row, std::size_t col) const { return data_[row * encoder_cols() + col]; }
  double& enc_bias(std::size_t row) { return data_[bias_offset() + row]; }
  double enc_bias(std::size_t row) const { return data_[bias_offset() + row]; }
  double& act(std::size_t row, std::size_t col) { return data_[act_offset() + row * scorer_cols() + col]; }
  double act(std::size_t row, std::size_t col) const {
    return data_[act_offset() + row * scorer_cols() + col];
  }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool all_finite() const;
  /// FNV-1a over the raw bytes; identifies the parameter values a cache was built from.
  std::uint64_t fingerprint() const;

  /// this += alpha * other. Shapes must agree.
  void axpy(double alpha, const PolicyParams& other);
  void scale(double alpha);

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

 private:
  std::size_t bias_offset() const { return hidden_ * encoder_cols(); }
  std::size_t act_offset() const { return bias_offset() + hidden_; }

  std::size_t hidden_ = 0;
  std::size_t features_ = 0;
  std::vector<double> data_;
};

using ParamGradient = PolicyParams;

struct HiddenState {
  std::vector<double> state;  // s_t
  std::vector<double> input;  // encoder input u_t, cached for backward
};

struct ActionDistribution {
  std::vector<double> logits;
  std::vector<double> probs;
};

/// s_t = tanh(W_enc [I ; x - kHistoryWeight * h ; 1] + b_enc).
HiddenState encode(const PolicyParams& params, std::span<const double> instruction,
                   std::span<const double> current_features, std::span<const double> history_mean);

/// Row-major K x (F+2) matrix of candidate inputs. STOP uses the current node's
/// features with length 0.
std::vector<double> candidate_inputs(const env::GraphWorld& world, const env::Observation& obs);

/// Max-subtracted softmax; safe for any finite logits.
std::vector<double> softmax(std::span<const double> logits);

/// logit_k = s^T W_act c_k.
ActionDistribution action_distribution(const PolicyParams& params, const HiddenState& hidden,
                                       std::span<const double> candidates);

/// argmax with ties to the lowest index.
std::size_t select_action(std::span<const double> probs);

/// Forward-pass record of one step.
struct StepCache {
  HiddenState hidden;
  std::vector<double> candidates;  // K x (F+2)
  ActionDistribution dist;
  std::size_t selected = 0;
  int node = 0;
  std::uint64_t params_fingerprint = 0;

  std::size_t num_candidates() const { return dist.probs.size(); }
};

/// Greedy rollout of one episode.
struct Rollout {
  std::vector<StepCache> steps;
  std::vector<int> nodes;  // visited nodes, start first, final last
  int final_node = 0;
  bool stopped = false;
};

/// Builds the forward cache for one observation. `fingerprint` may be passed
/// in when the caller already computed params.fingerprint().
StepCache forward_step(const PolicyParams& params, const env::GraphWorld& world,
                       std::span<const double> instruction, const env::Observation& obs,
                       std::span<const double> history_mean,
                       std::optional<std::uint64_t> fingerprint = std::nullopt);

/// Greedy (argmax) rollout until STOP or truncation.
Rollout rollout(const PolicyParams& params, const env::GraphWorld& world, const env::Task& task);

/// Recomputes the step caches along a fixed node sequence (teacher forcing).
/// When `stopped`, the last node is where STOP was taken and every node gets a
/// step; otherwise the last node is a truncation point with no step.
/// `selected` in each cache is the action actually taken along the sequence.
std::vector<StepCache> replay(const PolicyParams& params, const env::GraphWorld& world,
                              const env::Task& task, std::span<const int> nodes, bool stopped);

/// Exact gradient of sum_t (d_logits[t] . logits_t + d_states[t] . s_t) with
/// respect to all parameters. History is treated as a constant input.
/// Throws ContractViolation when a cache was built from different parameters.
ParamGradient backward(const PolicyParams& params, std::span<const StepCache> steps,
                       std::span<const std::vector<double>> d_logits,
                       std::span<const std::vector<double>> d_states = {});

struct BcOptions {
  std::size_t hidden_dim = 16;
  int epochs = 400;
  double learning_rate = 0.5;
  double momentum = 0.9;  // heavy-ball; 0 gives plain gradient descent
  double weight_decay = 0.0;  // L2 coefficient added to the loss gradient
  std::uint64_t seed = 0;
  double init_scale = 0.1;
};

/// One supervised state: replayed cache plus the expert's candidate index.
struct BcSample {
  StepCache cache;
  std::size_t expert = 0;
};

/// Expert node sequence for a task: the shortest path, cut at the first node
/// within the success radius (where the expert stops).
std::vector<int> expert_path(const env::GraphWorld& world, const env::Task& task);

/// Expert states along shortest paths. The expert action is STOP when the
/// node is within the success radius, else the first hop of a shortest path.
std::vector<BcSample> expert_samples(const PolicyParams& params, const env::GraphWorld& world,
                                     std::span<const env::Task> tasks);

struct BcReport {
  std::vector<double> loss_per_epoch;  // loss before each epoch's update, plus final
  double agreement = 0.0;              // expert-action agreement after training
};

/// Full-batch gradient descent on the cross-entropy to expert actions.
PolicyParams pretrain_bc(std::span<const env::GraphWorld> worlds,
                         std::span<const std::vector<env::Task>> tasks, const BcOptions& options,
                         BcReport* report = nullptr);

/// Fraction of expert states whose argmax equals the expert action.
double expert_agreement(const PolicyParams& params, std::span<const env::GraphWorld> worlds,
                        std::span<const std::vector<env::Task>> tasks);

/// Checkpoint: one JSON header line (dims, seed, schema version, count), then
/// the parameters as little-endian float64.
void save_checkpoint(const PolicyParams& params, std::uint64_t seed,
                     const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed = nullptr);

}  // namespace atena::policy
