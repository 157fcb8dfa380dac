#include "atena/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "atena/errors.hpp"

namespace atena::metrics {

EpisodeMetrics episode_metrics(const env::GraphWorld& world, const env::Task& task,
                               std::span<const int> nodes, bool stopped) {
  ATENA_REQUIRE(!nodes.empty(), "episode_metrics: empty trajectory");
  ATENA_REQUIRE(nodes.front() == task.start, "episode_metrics: trajectory must begin at start");
  EpisodeMetrics m;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const auto nbs = world.neighbors(nodes[i - 1]);
    const auto it = std::find_if(nbs.begin(), nbs.end(),
                                 [&](const env::Neighbor& n) { return n.node == nodes[i]; });
    ATENA_REQUIRE(it != nbs.end(), "episode_metrics: consecutive nodes are not adjacent");
    m.tl += it->length;
  }
  const auto to_goal = env::distances_from(world, task.goal);
  m.ne = to_goal[nodes.back()];
  m.success = stopped && m.ne <= task.success_radius;
  m.oracle_success = std::any_of(nodes.begin(), nodes.end(),
                                 [&](int n) { return to_goal[n] <= task.success_radius; });
  if (m.success) {
    const double shortest = to_goal[task.start];
    m.spl_term = shortest / std::max(m.tl, shortest);
  }
  return m;
}

nlohmann::ordered_json to_json(const EpisodeRecord& r) {
  auto opt = [](const std::optional<bool>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["episode_id"] = r.episode_id;
  j["seed"] = r.seed;
  j["world_index"] = r.world_index;
  j["start"] = r.start;
  j["goal"] = r.goal;
  j["route"] = r.route;
  j["source"] = r.source;
  j["mean_entropy"] = r.mean_entropy;
  j["true_success"] = r.true_success;
  j["label_used"] = opt(r.label_used);
  j["self_prediction"] = opt(r.self_prediction);
  j["l_mix"] = r.l_mix;
  j["l_self"] = r.l_self;
  j["l_total"] = r.l_total;
  j["updated"] = r.updated;
  j["trajectory"] = r.trajectory;
  j["stopped"] = r.stopped;
  j["tl"] = r.metrics.tl;
  j["ne"] = r.metrics.ne;
  j["oracle_success"] = r.metrics.oracle_success;
  j["spl_term"] = r.metrics.spl_term;
  j["step_entropies"] = r.step_entropies;
  j["step_mix_entropies"] = r.step_mix_entropies;
  return j;
}

namespace {

void tally(Confusion& c, bool predicted, bool actual) {
  if (predicted && actual) ++c.tp;
  else if (predicted && !actual) ++c.fp;
  else if (!predicted && !actual) ++c.tn;
  else ++c.fn;
}

nlohmann::ordered_json to_json(const Confusion& c) {
  nlohmann::ordered_json j;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["tn"] = c.tn;
  j["fn"] = c.fn;
  j["accuracy"] = c.accuracy();
  return j;
}

}  // namespace

RunReport aggregate(std::span<const EpisodeRecord> records) {
  if (records.empty()) throw std::invalid_argument("aggregate: no episodes");
  RunReport r;
  r.episodes = records.size();
  std::size_t successes = 0;
  std::size_t oracle_successes = 0;
  std::size_t total_steps = 0;
  std::size_t human_steps = 0;
  double spl = 0.0;
  for (const auto& e : records) {
    successes += e.metrics.success ? 1 : 0;
    oracle_successes += e.metrics.oracle_success ? 1 : 0;
    spl += e.metrics.spl_term;
    r.tl += e.metrics.tl;
    r.ne += e.metrics.ne;
    total_steps += e.steps();
    if (e.human_answered()) {
      ++r.human_episodes;
      human_steps += e.steps();
    }
    if (e.source == "agent(fallback)") ++r.fallback_episodes;
    if (e.updated) ++r.updates;
    if (e.self_prediction) tally(r.confusion, *e.self_prediction, e.true_success);
  }
  const double n = static_cast<double>(records.size());
  r.sr = 100.0 * static_cast<double>(successes) / n;
  r.osr = 100.0 * static_cast<double>(oracle_successes) / n;
  r.spl = 100.0 * spl / n;
  r.tl /= n;
  r.ne /= n;
  r.active_episode_ratio = static_cast<double>(r.human_episodes) / n;
  r.active_step_ratio =
      total_steps == 0 ? 0.0 : static_cast<double>(human_steps) / static_cast<double>(total_steps);

  std::size_t seen = 0;
  for (auto it = records.rbegin(); it != records.rend() && seen < kTailEpisodes; ++it) {
    if (!it->self_prediction) continue;
    tally(r.confusion_tail, *it->self_prediction, it->true_success);
    ++seen;
  }
  return r;
}

nlohmann::ordered_json to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["episodes"] = r.episodes;
  j["sr"] = r.sr;
  j["osr"] = r.osr;
  j["spl"] = r.spl;
  j["tl"] = r.tl;
  j["ne"] = r.ne;
  j["active_episode_ratio"] = r.active_episode_ratio;
  j["active_step_ratio"] = r.active_step_ratio;
  j["human_episodes"] = r.human_episodes;
  j["fallback_episodes"] = r.fallback_episodes;
  j["updates"] = r.updates;
  j["self_confusion"] = to_json(r.confusion);
  j["self_confusion_tail"] = to_json(r.confusion_tail);
  return j;
}

std::string csv_header() {
  return "episodes,sr,osr,spl,tl,ne,active_episode_ratio,active_step_ratio,human_episodes,"
         "self_tp,self_fp,self_tn,self_fn,self_accuracy,self_accuracy_tail";
}

std::string csv_row(const RunReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%zu,%zu,%zu,%zu,%zu,%.4f,%.4f",
                r.episodes, r.sr, r.osr, r.spl, r.tl, r.ne, r.active_episode_ratio,
                r.active_step_ratio, r.human_episodes, r.confusion.tp, r.confusion.fp,
                r.confusion.tn, r.confusion.fn, r.confusion.accuracy(),
                r.confusion_tail.accuracy());
  return buf;
}

}  // namespace atena::metrics
