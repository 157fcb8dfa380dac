#include "atena/envgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "atena/errors.hpp"
#include "atena/rng.hpp"

namespace atena::env {

namespace {

double distance(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::vector<std::vector<Neighbor>> build_adjacency(std::size_t n, std::span<const Edge> edges) {
  std::vector<std::vector<Neighbor>> adj(n);
  for (const auto& e : edges) {
    adj[e.u].push_back({e.v, e.length});
    adj[e.v].push_back({e.u, e.length});
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
  }
  return adj;
}

}  // namespace

bool is_connected(std::size_t n_nodes, std::span<const Edge> edges) {
  if (n_nodes == 0) return true;
  const auto adj = build_adjacency(n_nodes, edges);
  std::vector<char> seen(n_nodes, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (const auto& nb : adj[u]) {
      if (!seen[nb.node]) {
        seen[nb.node] = 1;
        ++reached;
        stack.push_back(nb.node);
      }
    }
  }
  return reached == n_nodes;
}

GraphWorld::GraphWorld(std::vector<Node> nodes, std::vector<Edge> edges, std::uint64_t seed)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), seed_(seed) {
  const auto n = nodes_.size();
  for (std::size_t i = 0; i < n; ++i) {
    ATENA_REQUIRE(nodes_[i].id == static_cast<int>(i), "node ids must be 0..n-1 in order");
    ATENA_REQUIRE(nodes_[i].features.size() == nodes_.front().features.size(),
                  "all nodes must share one feature dimension");
  }
  for (auto& e : edges_) {
    if (e.u > e.v) std::swap(e.u, e.v);
    ATENA_REQUIRE(e.u >= 0 && e.v < static_cast<int>(n) && e.u != e.v, "edge endpoint out of range");
    ATENA_REQUIRE(std::isfinite(e.length) && e.length > 0.0, "edge length must be positive");
  }
  std::sort(edges_.begin(), edges_.end(),
            [](const Edge& a, const Edge& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
  for (std::size_t i = 1; i < edges_.size(); ++i) {
    ATENA_REQUIRE(edges_[i].u != edges_[i - 1].u || edges_[i].v != edges_[i - 1].v,
                  "duplicate edge");
  }
  ATENA_REQUIRE(is_connected(n, edges_), "world graph must be connected");
  adjacency_ = build_adjacency(n, edges_);
}

const Node& GraphWorld::node(int id) const {
  ATENA_REQUIRE(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(), "node id out of range");
  return nodes_[id];
}

std::span<const Neighbor> GraphWorld::neighbors(int id) const {
  ATENA_REQUIRE(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(), "node id out of range");
  return adjacency_[id];
}

bool operator==(const GraphWorld& a, const GraphWorld& b) {
  if (a.seed_ != b.seed_ || a.nodes_.size() != b.nodes_.size() ||
      a.edges_.size() != b.edges_.size())
    return false;
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    const auto& p = a.nodes_[i];
    const auto& q = b.nodes_[i];
    if (p.position.x != q.position.x || p.position.y != q.position.y || p.features != q.features)
      return false;
  }
  for (std::size_t i = 0; i < a.edges_.size(); ++i) {
    const auto& e = a.edges_[i];
    const auto& f = b.edges_[i];
    if (e.u != f.u || e.v != f.v || e.length != f.length) return false;
  }
  return true;
}

GraphWorld generate_world(std::uint64_t seed, int n_nodes, int feature_dim, double connectivity,
                          const WorldStyle& style) {
  if (n_nodes < 4) throw GenerationError("generate_world: n_nodes must be >= 4");
  if (feature_dim < 1) throw GenerationError("generate_world: feature_dim must be >= 1");
  if (!(connectivity > 0.0 && connectivity <= 1.0))
    throw GenerationError("generate_world: connectivity must be in (0, 1]");

  const double radius = connectivity * style.extent * std::sqrt(2.0);
  const auto n = static_cast<std::size_t>(n_nodes);
  const auto f = static_cast<std::size_t>(feature_dim);

  for (int attempt = 0; attempt < style.max_retries; ++attempt) {
    Rng pos_rng(derive_seed(seed, "world/positions", attempt));
    std::vector<Vec2> pos;
    pos.reserve(n);
    // Spacing rejection is best effort; a crowded square falls back to plain
    // uniform placement for the remaining nodes.
    for (std::size_t i = 0; i < n; ++i) {
      Vec2 p;
      for (int tries = 0; tries < 64; ++tries) {
        p = {pos_rng.uniform(0.0, style.extent), pos_rng.uniform(0.0, style.extent)};
        bool ok = true;
        for (const auto& q : pos) {
          if (distance(p, q) < style.min_spacing) {
            ok = false;
            break;
          }
        }
        if (ok) break;
      }
      pos.push_back(p);
    }

    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = distance(pos[i], pos[j]);
        if (d < radius && d > 0.0) edges.push_back({static_cast<int>(i), static_cast<int>(j), d});
      }
    }
    if (!is_connected(n, edges)) continue;

    // Landmark code: one radial basis response per feature, centered on seeded
    // landmark positions, plus i.i.d. noise.
    Rng code_rng(derive_seed(style.landmark_seed, "world/landmarks"));
    std::vector<Vec2> centers(f);
    for (auto& c : centers) c = {code_rng.uniform(0.0, style.extent), code_rng.uniform(0.0, style.extent)};
    const double width = style.code_width * style.extent / std::sqrt(static_cast<double>(f));
    Rng noise_rng(derive_seed(seed, "world/feature-noise"));

    std::vector<Node> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
      nodes[i].id = static_cast<int>(i);
      nodes[i].position = pos[i];
      nodes[i].features.resize(f);
      double norm = 0.0;
      for (std::size_t k = 0; k < f; ++k) {
        const double d = distance(pos[i], centers[k]);
        nodes[i].features[k] = std::exp(-0.5 * d * d / (width * width));
        norm += nodes[i].features[k] * nodes[i].features[k];
      }
      // Unit-length code, so similarity to an instruction ranks nodes by distance.
      norm = std::sqrt(norm);
      for (auto& v : nodes[i].features) v = v / norm + style.feature_noise * noise_rng.normal();
    }
    return GraphWorld(std::move(nodes), std::move(edges), seed);
  }
  throw GenerationError("generate_world: no connected graph after " +
                        std::to_string(style.max_retries) + " attempts (connectivity too low?)");
}

GraphWorld apply_shift(const GraphWorld& world, const ShiftParams& shift, std::uint64_t seed,
                       int max_retries) {
  if (!(shift.edge_dropout >= 0.0 && shift.edge_dropout < 1.0))
    throw GenerationError("apply_shift: edge_dropout must be in [0, 1)");
  if (!(shift.drift_fraction >= 0.0 && shift.drift_fraction <= 1.0))
    throw GenerationError("apply_shift: drift_fraction must be in [0, 1]");
  if (shift.feature_noise_std < 0.0 || shift.feature_drift < 0.0)
    throw GenerationError("apply_shift: noise and drift magnitudes must be >= 0");

  std::vector<Node> nodes = world.nodes();
  const std::size_t f = world.feature_dim();

  if (shift.feature_drift > 0.0) {
    // Shared affine drift x' = x + m * (A x + o); independent of the world.
    Rng drift_rng(derive_seed(seed, "shift/drift"));
    std::vector<double> mix(f * f);
    std::vector<double> offset(f);
    const double scale = 1.0 / std::sqrt(static_cast<double>(f));
    for (auto& a : mix) a = scale * drift_rng.normal();
    for (auto& o : offset) o = 0.5 * drift_rng.normal();
    std::vector<std::size_t> channels(f);
    for (std::size_t r = 0; r < f; ++r) channels[r] = r;
    drift_rng.shuffle(channels.begin(), channels.end());
    const auto touched = static_cast<std::size_t>(std::ceil(shift.drift_fraction * static_cast<double>(f)));
    channels.resize(std::min(touched, f));
    const double extent = WorldStyle{}.extent;
    const Vec2 center{drift_rng.uniform(0.0, extent), drift_rng.uniform(0.0, extent)};
    for (auto& node : nodes) {
      const std::vector<double> x = node.features;
      double weight = 1.0;
      if (shift.drift_radius > 0.0) {
        const double d = distance(node.position, center) / shift.drift_radius;
        weight = std::exp(-0.5 * d * d);
      }
      for (std::size_t r : channels) {
        double acc = offset[r];
        for (std::size_t c = 0; c < f; ++c) acc += mix[r * f + c] * x[c];
        node.features[r] = x[r] + weight * shift.feature_drift * acc;
      }
    }
  }
  if (shift.feature_noise_std > 0.0) {
    Rng noise_rng(derive_seed(seed ^ world.seed(), "shift/noise"));
    for (auto& node : nodes) {
      for (auto& v : node.features) v += shift.feature_noise_std * noise_rng.normal();
    }
  }

  std::vector<Edge> edges = world.edges();
  const auto target = static_cast<std::size_t>(std::floor(shift.edge_dropout * edges.size()));
  if (target > 0) {
    bool done = false;
    for (int attempt = 0; attempt < max_retries && !done; ++attempt) {
      Rng drop_rng(derive_seed(seed ^ world.seed(), "shift/dropout", attempt));
      std::vector<std::size_t> order(edges.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      drop_rng.shuffle(order.begin(), order.end());
      std::vector<char> removed(edges.size(), 0);
      std::size_t count = 0;
      for (std::size_t idx : order) {
        if (count == target) break;
        removed[idx] = 1;
        std::vector<Edge> kept;
        for (std::size_t i = 0; i < edges.size(); ++i)
          if (!removed[i]) kept.push_back(edges[i]);
        if (is_connected(nodes.size(), kept)) {
          ++count;
        } else {
          removed[idx] = 0;  // bridge
        }
      }
      if (count == target) {
        std::vector<Edge> kept;
        for (std::size_t i = 0; i < edges.size(); ++i)
          if (!removed[i]) kept.push_back(edges[i]);
        edges = std::move(kept);
        done = true;
      }
    }
    if (!done)
      throw GenerationError("apply_shift: edge dropout would disconnect the graph");
  }
  return GraphWorld(std::move(nodes), std::move(edges), world.seed());
}

std::vector<double> distances_from(const GraphWorld& world, int source) {
  world.node(source);
  std::vector<double> dist(world.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (const auto& nb : world.neighbors(u)) {
      const double nd = d + nb.length;
      if (nd < dist[nb.node]) {
        dist[nb.node] = nd;
        heap.push({nd, nb.node});
      }
    }
  }
  return dist;
}

double geodesic(const GraphWorld& world, int a, int b) {
  world.node(b);
  if (a == b) return 0.0;
  return distances_from(world, a)[b];
}

std::vector<int> shortest_path(const GraphWorld& world, int a, int b) {
  // Walk forward from a along neighbors that stay on a shortest path to b.
  const auto to_goal = distances_from(world, b);
  std::vector<int> path{a};
  int cur = a;
  while (cur != b) {
    int next = -1;
    for (const auto& nb : world.neighbors(cur)) {
      const double through = nb.length + to_goal[nb.node];
      if (std::abs(through - to_goal[cur]) <= 1e-9 * std::max(1.0, to_goal[cur])) {
        next = nb.node;
        break;
      }
    }
    ATENA_REQUIRE(next >= 0, "shortest_path: no consistent successor");
    path.push_back(next);
    cur = next;
  }
  return path;
}

Task make_task(const GraphWorld& world, int start, int goal, std::uint64_t seed,
               const TaskStyle& style) {
  if (start == goal || geodesic(world, start, goal) <= style.success_radius)
    throw GenerationError("make_task: start and goal are within the success radius");
  const auto path = shortest_path(world, start, goal);

  Task task;
  task.start = start;
  task.goal = goal;
  task.success_radius = style.success_radius;
  task.max_steps = style.max_steps;
  task.seed = seed;

  // Landmarks come from the path interior when it has one, else from the path.
  Rng rng(derive_seed(seed, "task/landmarks"));
  std::vector<int> pool(path.begin() + 1, path.end() - 1);
  if (pool.empty()) pool = path;
  task.landmarks[0] = pool[rng.below(pool.size())];
  task.landmarks[1] = pool[rng.below(pool.size())];

  const auto g = world.features(goal);
  const auto l0 = world.features(task.landmarks[0]);
  const auto l1 = world.features(task.landmarks[1]);
  const double w = style.landmark_weight;
  task.instruction.resize(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    task.instruction[k] = (1.0 - w) * g[k] + w * 0.5 * (l0[k] + l1[k]);
  }
  return task;
}

std::vector<Task> generate_tasks(const GraphWorld& world, int count, std::uint64_t seed,
                                 const TaskStyle& style) {
  std::vector<Task> tasks;
  tasks.reserve(static_cast<std::size_t>(std::max(count, 0)));
  const auto n = world.size();
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, "task/pair", static_cast<std::uint64_t>(i)));
    bool found = false;
    for (int attempt = 0; attempt < style.max_retries; ++attempt) {
      const int s = static_cast<int>(rng.below(n));
      const int g = static_cast<int>(rng.below(n));
      if (s == g) continue;
      if (geodesic(world, s, g) <= style.success_radius) continue;
      const auto hops = static_cast<int>(shortest_path(world, s, g).size()) - 1;
      if (hops < style.min_hops || hops > style.max_hops) continue;
      tasks.push_back(make_task(world, s, g, derive_seed(seed, "task/instruction", i), style));
      found = true;
      break;
    }
    if (!found) throw GenerationError("generate_tasks: no admissible start/goal pair");
  }
  return tasks;
}

bool is_success(const GraphWorld& world, int final_node, const Task& task) {
  return geodesic(world, final_node, task.goal) <= task.success_radius;
}

Observation observe(const GraphWorld& world, int node, int step_index) {
  Observation obs;
  obs.current = node;
  obs.step_index = step_index;
  const auto nbs = world.neighbors(node);
  obs.candidates.reserve(nbs.size() + 1);
  obs.candidates.push_back({node, 0.0, true});
  for (const auto& nb : nbs) obs.candidates.push_back({nb.node, nb.length, false});
  return obs;
}

Observation initial_observation(const GraphWorld& world, const Task& task) {
  return observe(world, task.start, 0);
}

StepResult step(const GraphWorld& world, const Observation& obs, std::size_t action,
                int max_steps) {
  ATENA_REQUIRE(action < obs.candidates.size(), "step: action index out of range");
  const int taken = obs.step_index + 1;
  if (action == 0) return Terminal{obs.current, taken, true};
  const int next = obs.candidates[action].node;
  if (taken >= max_steps) return Terminal{next, taken, false};
  return observe(world, next, taken);
}

nlohmann::ordered_json to_json(const GraphWorld& world) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["seed"] = world.seed();
  j["feature_dim"] = world.feature_dim();
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : world.nodes()) {
    nlohmann::ordered_json jn;
    jn["id"] = n.id;
    jn["position"] = {n.position.x, n.position.y};
    jn["features"] = n.features;
    nodes.push_back(std::move(jn));
  }
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : world.edges()) edges.push_back({e.u, e.v, e.length});
  return j;
}

GraphWorld world_from_json(const nlohmann::ordered_json& j) {
  std::vector<Node> nodes;
  for (const auto& jn : j.at("nodes")) {
    Node n;
    n.id = jn.at("id").get<int>();
    n.position = {jn.at("position").at(0).get<double>(), jn.at("position").at(1).get<double>()};
    n.features = jn.at("features").get<std::vector<double>>();
    nodes.push_back(std::move(n));
  }
  std::vector<Edge> edges;
  for (const auto& je : j.at("edges")) {
    edges.push_back({je.at(0).get<int>(), je.at(1).get<int>(), je.at(2).get<double>()});
  }
  return GraphWorld(std::move(nodes), std::move(edges), j.at("seed").get<std::uint64_t>());
}

nlohmann::ordered_json to_json(const Task& task) {
  nlohmann::ordered_json j;
  j["start"] = task.start;
  j["goal"] = task.goal;
  j["success_radius"] = task.success_radius;
  j["max_steps"] = task.max_steps;
  j["landmarks"] = task.landmarks;
  j["seed"] = task.seed;
  j["instruction"] = task.instruction;
  return j;
}

}  // namespace atena::env
