#pragma once

// Independent reference implementations used as test oracles.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "atena/envgraph.hpp"
#include "atena/policy.hpp"
#include "atena/rng.hpp"

namespace atena::oracle_ref {

/// Bellman-Ford over the edge list; no priority queue, no adjacency.
inline std::vector<double> bellman_ford(const env::GraphWorld& world, int source) {
  std::vector<double> d(world.size(), std::numeric_limits<double>::infinity());
  d[source] = 0.0;
  for (std::size_t round = 0; round + 1 < world.size(); ++round) {
    bool changed = false;
    for (const auto& e : world.edges()) {
      if (d[e.u] + e.length < d[e.v]) d[e.v] = d[e.u] + e.length, changed = true;
      if (d[e.v] + e.length < d[e.u]) d[e.u] = d[e.v] + e.length, changed = true;
    }
    if (!changed) break;
  }
  return d;
}

inline bool bfs_connected(const env::GraphWorld& world) {
  std::vector<char> seen(world.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    for (const auto& e : world.edges()) {
      int other = e.u == n ? e.v : (e.v == n ? e.u : -1);
      if (other >= 0 && !seen[other]) seen[other] = 1, stack.push_back(other);
    }
  }
  for (char s : seen)
    if (!s) return false;
  return true;
}

inline std::vector<double> features_of(int f, double v) { return std::vector<double>(f, v); }

/// 0 - 1 - 2 - ... with unit edges along the x axis.
inline env::GraphWorld path_world(int n, int feature_dim = 2) {
  std::vector<env::Node> nodes;
  std::vector<env::Edge> edges;
  for (int i = 0; i < n; ++i) {
    std::vector<double> f(feature_dim, 0.0);
    f[i % feature_dim] = 1.0;
    nodes.push_back({i, {static_cast<double>(i), 0.0}, f});
    if (i > 0) edges.push_back({i - 1, i, 1.0});
  }
  return env::GraphWorld(std::move(nodes), std::move(edges), 1);
}

inline env::GraphWorld cycle_world(int n, int feature_dim = 2) {
  std::vector<env::Node> nodes;
  std::vector<env::Edge> edges;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    std::vector<double> f(feature_dim, 0.1 * i);
    nodes.push_back({i, {5.0 * std::cos(a), 5.0 * std::sin(a)}, f});
  }
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    edges.push_back({std::min(i, j), std::max(i, j), 1.0});
  }
  return env::GraphWorld(std::move(nodes), std::move(edges), 2);
}

inline std::vector<double> random_simplex(Rng& rng, std::size_t k) {
  std::vector<double> p(k);
  double sum = 0.0;
  for (auto& v : p) {
    v = -std::log(1.0 - rng.uniform());
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

/// Central differences of `loss` at every parameter.
inline std::vector<double> numeric_gradient(const policy::PolicyParams& params,
                                            const std::function<double(const policy::PolicyParams&)>& loss,
                                            double eps = 1e-4) {
  std::vector<double> g(params.size());
  auto p = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = p.flat()[i];
    p.flat()[i] = orig + eps;
    const double up = loss(p);
    p.flat()[i] = orig - eps;
    const double down = loss(p);
    p.flat()[i] = orig;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

/// |a - b| <= rel * max(|a|, |b|), with an absolute floor for entries that
/// are zero up to rounding in the difference quotient.
inline bool rel_close(double a, double b, double rel, double floor = 1e-10) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + floor;
}

}  // namespace atena::oracle_ref
