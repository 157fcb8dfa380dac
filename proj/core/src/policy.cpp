#include "atena/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "atena/errors.hpp"
#include "atena/rng.hpp"

namespace atena::policy {

PolicyParams::PolicyParams(std::size_t hidden_dim, std::size_t feature_dim)
    : hidden_(hidden_dim), features_(feature_dim) {
  ATENA_REQUIRE(hidden_dim > 0 && feature_dim > 0, "policy dimensions must be positive");
  data_.assign(hidden_ * encoder_cols() + hidden_ + hidden_ * scorer_cols(), 0.0);
}

PolicyParams PolicyParams::random(std::size_t hidden_dim, std::size_t feature_dim,
                                  std::uint64_t seed, double scale) {
  PolicyParams p(hidden_dim, feature_dim);
  Rng rng(derive_seed(seed, "policy/init"));
  for (auto& v : p.data_) v = rng.uniform(-scale, scale);
  return p;
}

bool PolicyParams::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::uint64_t PolicyParams::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : data_) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h ^ (hidden_ * 0x9e3779b97f4a7c15ULL) ^ features_;
}

void PolicyParams::axpy(double alpha, const PolicyParams& other) {
  ATENA_REQUIRE(hidden_ == other.hidden_ && features_ == other.features_,
                "axpy: parameter shapes differ");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * other.data_[i];
}

void PolicyParams::scale(double alpha) {
  for (auto& v : data_) v *= alpha;
}

HiddenState encode(const PolicyParams& params, std::span<const double> instruction,
                   std::span<const double> current_features, std::span<const double> history_mean) {
  const std::size_t f = params.feature_dim();
  const std::size_t d = params.hidden_dim();
  ATENA_REQUIRE(instruction.size() == f && current_features.size() == f && history_mean.size() == f,
                "encode: feature dimension mismatch");
  HiddenState h;
  h.input.resize(2 * f + 1);
  std::copy(instruction.begin(), instruction.end(), h.input.begin());
  for (std::size_t k = 0; k < f; ++k)
    h.input[f + k] = current_features[k] - kHistoryWeight * history_mean[k];
  h.input[2 * f] = 1.0;

  h.state.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = params.enc_bias(i);
    for (std::size_t j = 0; j < h.input.size(); ++j) acc += params.enc(i, j) * h.input[j];
    h.state[i] = std::tanh(acc);
  }
  return h;
}

std::vector<double> candidate_inputs(const env::GraphWorld& world, const env::Observation& obs) {
  const std::size_t f = world.feature_dim();
  const std::size_t cols = f + 2;
  std::vector<double> m(obs.candidates.size() * cols);
  for (std::size_t k = 0; k < obs.candidates.size(); ++k) {
    const auto& c = obs.candidates[k];
    const auto x = world.features(c.node);
    std::copy(x.begin(), x.end(), m.begin() + static_cast<std::ptrdiff_t>(k * cols));
    m[k * cols + f] = c.length * kLengthScale;
    m[k * cols + f + 1] = 1.0;
  }
  return m;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - top);
    z += p[k];
  }
  for (auto& v : p) v /= z;
  return p;
}

ActionDistribution action_distribution(const PolicyParams& params, const HiddenState& hidden,
                                       std::span<const double> candidates) {
  const std::size_t d = params.hidden_dim();
  const std::size_t cols = params.scorer_cols();
  ATENA_REQUIRE(hidden.state.size() == d, "action_distribution: hidden state size mismatch");
  ATENA_REQUIRE(!candidates.empty() && candidates.size() % cols == 0,
                "action_distribution: candidate matrix shape mismatch");

  // r = W_act^T s, then logit_k = r . c_k
  std::vector<double> r(cols, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < cols; ++j) r[j] += hidden.state[i] * params.act(i, j);

  ActionDistribution dist;
  const std::size_t k_count = candidates.size() / cols;
  dist.logits.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += r[j] * candidates[k * cols + j];
    dist.logits[k] = acc;
  }
  dist.probs = softmax(dist.logits);
  return dist;
}

std::size_t select_action(std::span<const double> probs) {
  ATENA_REQUIRE(!probs.empty(), "select_action: empty distribution");
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k)
    if (probs[k] > probs[best]) best = k;
  return best;
}

StepCache forward_step(const PolicyParams& params, const env::GraphWorld& world,
                       std::span<const double> instruction, const env::Observation& obs,
                       std::span<const double> history_mean,
                       std::optional<std::uint64_t> fingerprint) {
  StepCache c;
  c.node = obs.current;
  c.hidden = encode(params, instruction, world.features(obs.current), history_mean);
  c.candidates = candidate_inputs(world, obs);
  c.dist = action_distribution(params, c.hidden, c.candidates);
  c.selected = select_action(c.dist.probs);
  c.params_fingerprint = fingerprint ? *fingerprint : params.fingerprint();
  return c;
}

namespace {

// Running mean of visited-node features, excluding the current node.
class History {
 public:
  explicit History(std::size_t f) : sum_(f, 0.0), mean_(f, 0.0) {}
  std::span<const double> mean() const { return mean_; }
  void visit(std::span<const double> x) {
    ++count_;
    for (std::size_t k = 0; k < sum_.size(); ++k) {
      sum_[k] += x[k];
      mean_[k] = sum_[k] / static_cast<double>(count_);
    }
  }

 private:
  std::vector<double> sum_;
  std::vector<double> mean_;
  std::size_t count_ = 0;
};

}  // namespace

Rollout rollout(const PolicyParams& params, const env::GraphWorld& world, const env::Task& task) {
  Rollout out;
  const auto fp = params.fingerprint();
  History history(world.feature_dim());
  env::StepResult state = env::initial_observation(world, task);
  out.nodes.push_back(task.start);
  while (const auto* obs = std::get_if<env::Observation>(&state)) {
    auto cache = forward_step(params, world, task.instruction, *obs, history.mean(), fp);
    const std::size_t action = cache.selected;
    history.visit(world.features(obs->current));
    out.steps.push_back(std::move(cache));
    state = env::step(world, *obs, action, task.max_steps);
    if (const auto* next = std::get_if<env::Observation>(&state)) out.nodes.push_back(next->current);
  }
  const auto& term = std::get<env::Terminal>(state);
  out.final_node = term.node;
  out.stopped = term.stopped;
  if (!term.stopped) out.nodes.push_back(term.node);
  return out;
}

std::vector<StepCache> replay(const PolicyParams& params, const env::GraphWorld& world,
                              const env::Task& task, std::span<const int> nodes, bool stopped) {
  ATENA_REQUIRE(!nodes.empty(), "replay: empty node sequence");
  const std::size_t steps = stopped ? nodes.size() : nodes.size() - 1;
  std::vector<StepCache> out;
  out.reserve(steps);
  const auto fp = params.fingerprint();
  History history(world.feature_dim());
  for (std::size_t t = 0; t < steps; ++t) {
    const auto obs = env::observe(world, nodes[t], static_cast<int>(t));
    auto cache = forward_step(params, world, task.instruction, obs, history.mean(), fp);
    if (t + 1 < nodes.size()) {
      const auto it = std::find_if(obs.candidates.begin() + 1, obs.candidates.end(),
                                   [&](const env::Candidate& c) { return c.node == nodes[t + 1]; });
      ATENA_REQUIRE(it != obs.candidates.end(), "replay: consecutive nodes are not adjacent");
      cache.selected = static_cast<std::size_t>(it - obs.candidates.begin());
    } else {
      cache.selected = 0;
    }
    history.visit(world.features(nodes[t]));
    out.push_back(std::move(cache));
  }
  return out;
}

ParamGradient backward(const PolicyParams& params, std::span<const StepCache> steps,
                       std::span<const std::vector<double>> d_logits,
                       std::span<const std::vector<double>> d_states) {
  ATENA_REQUIRE(d_logits.size() == steps.size(), "backward: one d_logits vector per step");
  ATENA_REQUIRE(d_states.empty() || d_states.size() == steps.size(),
                "backward: d_states must be empty or one per step");
  const std::size_t d = params.hidden_dim();
  const std::size_t cols = params.scorer_cols();
  const std::size_t in_cols = params.encoder_cols();
  const std::uint64_t fp = params.fingerprint();

  ParamGradient grad(d, params.feature_dim());
  std::vector<double> dr(cols);
  std::vector<double> ds(d);
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto& c = steps[t];
    ATENA_REQUIRE(c.params_fingerprint == fp, "backward: step cache is stale");
    ATENA_REQUIRE(d_logits[t].size() == c.num_candidates(), "backward: d_logits size mismatch");
    const auto& s = c.hidden.state;

    std::fill(dr.begin(), dr.end(), 0.0);
    for (std::size_t k = 0; k < c.num_candidates(); ++k) {
      const double g = d_logits[t][k];
      if (g == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) dr[j] += g * c.candidates[k * cols + j];
    }
    for (std::size_t i = 0; i < d; ++i) {
      double acc = d_states.empty() ? 0.0 : d_states[t][i];
      for (std::size_t j = 0; j < cols; ++j) {
        grad.act(i, j) += s[i] * dr[j];
        acc += params.act(i, j) * dr[j];
      }
      ds[i] = acc;
    }
    for (std::size_t i = 0; i < d; ++i) {
      const double dpre = ds[i] * (1.0 - s[i] * s[i]);
      if (dpre == 0.0) continue;
      grad.enc_bias(i) += dpre;
      for (std::size_t j = 0; j < in_cols; ++j) grad.enc(i, j) += dpre * c.hidden.input[j];
    }
  }
  return grad;
}

std::vector<int> expert_path(const env::GraphWorld& world, const env::Task& task) {
  const auto to_goal = env::distances_from(world, task.goal);
  std::vector<int> nodes;
  for (int n : env::shortest_path(world, task.start, task.goal)) {
    nodes.push_back(n);
    if (to_goal[n] <= task.success_radius) break;
  }
  return nodes;
}

namespace {

void append_samples(const PolicyParams& params, const env::GraphWorld& world,
                    const env::Task& task, std::span<const int> path, std::vector<BcSample>& out) {
  for (auto& c : replay(params, world, task, path, true)) {
    const std::size_t expert = c.selected;
    out.push_back({std::move(c), expert});
  }
}

// Expert paths are fixed during training; computed once.
using ExpertPaths = std::vector<std::vector<std::vector<int>>>;  // [world][task]

ExpertPaths all_expert_paths(std::span<const env::GraphWorld> worlds,
                             std::span<const std::vector<env::Task>> tasks) {
  ExpertPaths paths;
  for (std::size_t w = 0; w < worlds.size(); ++w) {
    auto& per_world = paths.emplace_back();
    for (const auto& task : tasks[w]) per_world.push_back(expert_path(worlds[w], task));
  }
  return paths;
}

struct BatchResult {
  double loss = 0.0;
  std::size_t agree = 0;
  std::size_t count = 0;
  ParamGradient grad;
};

BatchResult cross_entropy_batch(const PolicyParams& params, std::span<const env::GraphWorld> worlds,
                                std::span<const std::vector<env::Task>> tasks,
                                const ExpertPaths& paths, bool want_grad) {
  BatchResult r;
  r.grad = ParamGradient(params.hidden_dim(), params.feature_dim());
  std::vector<BcSample> samples;
  std::vector<StepCache> caches;
  std::vector<std::vector<double>> d_logits;
  for (std::size_t w = 0; w < worlds.size(); ++w) {
    samples.clear();
    for (std::size_t t = 0; t < tasks[w].size(); ++t)
      append_samples(params, worlds[w], tasks[w][t], paths[w][t], samples);
    caches.clear();
    d_logits.clear();
    for (auto& s : samples) {
      const auto& p = s.cache.dist.probs;
      r.loss -= std::log(std::max(p[s.expert], 1e-300));
      if (select_action(p) == s.expert) ++r.agree;
      ++r.count;
      if (want_grad) {
        std::vector<double> g = p;
        g[s.expert] -= 1.0;
        d_logits.push_back(std::move(g));
        caches.push_back(std::move(s.cache));
      }
    }
    if (want_grad) r.grad.axpy(1.0, backward(params, caches, d_logits));
  }
  if (r.count > 0) {
    r.loss /= static_cast<double>(r.count);
    r.grad.scale(1.0 / static_cast<double>(r.count));
  }
  return r;
}

}  // namespace

std::vector<BcSample> expert_samples(const PolicyParams& params, const env::GraphWorld& world,
                                     std::span<const env::Task> tasks) {
  std::vector<BcSample> out;
  for (const auto& task : tasks) append_samples(params, world, task, expert_path(world, task), out);
  return out;
}

PolicyParams pretrain_bc(std::span<const env::GraphWorld> worlds,
                         std::span<const std::vector<env::Task>> tasks, const BcOptions& options,
                         BcReport* report) {
  ATENA_REQUIRE(!worlds.empty() && worlds.size() == tasks.size(),
                "pretrain_bc: one task list per world");
  const auto paths = all_expert_paths(worlds, tasks);
  auto params = PolicyParams::random(options.hidden_dim, worlds.front().feature_dim(),
                                     options.seed, options.init_scale);
  ParamGradient velocity(params.hidden_dim(), params.feature_dim());
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    auto batch = cross_entropy_batch(params, worlds, tasks, paths, true);
    if (report) report->loss_per_epoch.push_back(batch.loss);
    velocity.scale(options.momentum);
    velocity.axpy(1.0, batch.grad);
    if (options.weight_decay > 0.0) velocity.axpy(options.weight_decay, params);
    params.axpy(-options.learning_rate, velocity);
    ATENA_REQUIRE(params.all_finite(), "pretrain_bc: parameters diverged");
  }
  if (report) {
    const auto final_batch = cross_entropy_batch(params, worlds, tasks, paths, false);
    report->loss_per_epoch.push_back(final_batch.loss);
    report->agreement = static_cast<double>(final_batch.agree) /
                        static_cast<double>(std::max<std::size_t>(final_batch.count, 1));
  }
  return params;
}

double expert_agreement(const PolicyParams& params, std::span<const env::GraphWorld> worlds,
                        std::span<const std::vector<env::Task>> tasks) {
  const auto r = cross_entropy_batch(params, worlds, tasks, all_expert_paths(worlds, tasks), false);
  return r.count == 0 ? 0.0 : static_cast<double>(r.agree) / static_cast<double>(r.count);
}

void save_checkpoint(const PolicyParams& params, std::uint64_t seed,
                     const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["schema_version"] = 1;
  header["kind"] = "atena.policy";
  header["hidden_dim"] = params.hidden_dim();
  header["feature_dim"] = params.feature_dim();
  header["seed"] = seed;
  header["count"] = params.size();
  header["dtype"] = "float64-le";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out << header.dump() << '\n';
  for (double v : params.flat()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffU);
    out.write(bytes, 8);
  }
}

PolicyParams load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line);
  if (header.at("schema_version").get<int>() != 1 || header.at("kind") != "atena.policy")
    throw std::runtime_error("load_checkpoint: unsupported checkpoint header");
  PolicyParams params(header.at("hidden_dim").get<std::size_t>(),
                      header.at("feature_dim").get<std::size_t>());
  if (header.at("count").get<std::size_t>() != params.size())
    throw std::runtime_error("load_checkpoint: parameter count does not match dims");
  for (auto& v : params.flat()) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8))
      throw std::runtime_error("load_checkpoint: truncated parameter block");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
  }
  if (seed) *seed = header.at("seed").get<std::uint64_t>();
  return params;
}

}  // namespace atena::policy
