#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace atena::env {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Node {
  int id = 0;
  Vec2 position;
  std::vector<double> features;
};

/// Undirected edge, stored with u < v.
struct Edge {
  int u = 0;
  int v = 0;
  double length = 0.0;
};

struct Neighbor {
  int node = 0;
  double length = 0.0;
};

/// Generation knobs that are not part of the generate_world signature.
struct WorldStyle {
  double extent = 30.0;         // side of the square, meters
  double min_spacing = 1.5;     // rejection distance between nodes, meters
  double feature_noise = 0.05;  // std of per-node noise on the landmark code
  double code_width = 0.8;      // RBF width as a fraction of extent / sqrt(F)
  std::uint64_t landmark_seed = 0x1a2d;  // landmark centers are shared by every world
  int max_retries = 200;
};

/// Weighted undirected connected graph with per-node feature vectors.
class GraphWorld {
 public:
  GraphWorld() = default;
  /// Validates ids, edge lengths, duplicate edges and connectivity.
  GraphWorld(std::vector<Node> nodes, std::vector<Edge> edges, std::uint64_t seed);

  std::size_t size() const { return nodes_.size(); }
  std::size_t feature_dim() const { return nodes_.empty() ? 0 : nodes_.front().features.size(); }
  std::uint64_t seed() const { return seed_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Node& node(int id) const;
  std::span<const double> features(int id) const { return node(id).features; }

  /// Neighbors in ascending node id.
  std::span<const Neighbor> neighbors(int id) const;

  friend bool operator==(const GraphWorld& a, const GraphWorld& b);

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::uint64_t seed_ = 0;
};

bool is_connected(std::size_t n_nodes, std::span<const Edge> edges);

/// Random geometric graph on [0, extent]^2; an edge joins nodes closer than
/// connectivity * extent * sqrt(2). Throws GenerationError when no connected
/// sample is found within style.max_retries attempts.
GraphWorld generate_world(std::uint64_t seed, int n_nodes, int feature_dim, double connectivity,
                          const WorldStyle& style = {});

struct ShiftParams {
  double feature_noise_std = 0.0;  // i.i.d. per-node, per-world noise
  double edge_dropout = 0.0;       // fraction of edges to drop (non-bridges only)
  double feature_drift = 0.0;      // magnitude of the shared affine feature drift
  double drift_fraction = 1.0;     // share of feature channels the drift touches
  double drift_radius = 0.0;       // > 0: drift fades with distance from a seeded center, meters
};

/// Perturbs a world. The affine drift depends only on `seed`, so applying the
/// same shift seed to several worlds yields one consistent domain; noise and
/// dropout additionally mix in the world's own seed.
GraphWorld apply_shift(const GraphWorld& world, const ShiftParams& shift, std::uint64_t seed,
                       int max_retries = 50);

double geodesic(const GraphWorld& world, int a, int b);
/// Dijkstra from one source.
std::vector<double> distances_from(const GraphWorld& world, int source);
/// One shortest path a..b inclusive; ties resolved towards lower node ids.
std::vector<int> shortest_path(const GraphWorld& world, int a, int b);

struct TaskStyle {
  double success_radius = 3.0;
  int max_steps = 20;
  int min_hops = 3;
  int max_hops = 8;
  double landmark_weight = 0.25;  // share of the landmark average in the instruction
  int max_retries = 1000;
};

struct Task {
  int start = 0;
  int goal = 0;
  std::vector<double> instruction;
  double success_radius = 3.0;
  int max_steps = 20;
  std::array<int, 2> landmarks{0, 0};
  std::uint64_t seed = 0;
};

/// Builds a task for a fixed (start, goal). Throws GenerationError when the
/// pair is trivial (geodesic <= success radius).
Task make_task(const GraphWorld& world, int start, int goal, std::uint64_t seed,
               const TaskStyle& style = {});
std::vector<Task> generate_tasks(const GraphWorld& world, int count, std::uint64_t seed,
                                 const TaskStyle& style = {});

/// Inclusive: geodesic(final, goal) <= success_radius.
bool is_success(const GraphWorld& world, int final_node, const Task& task);

/// A candidate action. Index 0 is always STOP, whose node is the current node
/// and whose length is 0.
struct Candidate {
  int node = 0;
  double length = 0.0;
  bool stop = false;
};

struct Observation {
  int current = 0;
  std::vector<Candidate> candidates;
  int step_index = 0;
};

struct Terminal {
  int node = 0;
  int steps = 0;       // number of actions taken, including STOP
  bool stopped = true; // false when truncated at max_steps
};

using StepResult = std::variant<Observation, Terminal>;

Observation observe(const GraphWorld& world, int node, int step_index);
Observation initial_observation(const GraphWorld& world, const Task& task);

/// Applies candidate `action`. STOP, or reaching max_steps, terminates.
/// An out-of-range action throws ContractViolation.
StepResult step(const GraphWorld& world, const Observation& obs, std::size_t action,
                int max_steps);

nlohmann::ordered_json to_json(const GraphWorld& world);
GraphWorld world_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const Task& task);

}  // namespace atena::env
