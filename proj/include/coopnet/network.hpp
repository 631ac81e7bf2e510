#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "coopnet/config.hpp"
#include "coopnet/errors.hpp"
#include "coopnet/game.hpp"
#include "coopnet/rng.hpp"

namespace coopnet {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Undirected simple graph with a C/D strategy per node and the random
/// stream that drives the run. The edge count only changes through
/// add_edge/remove_edge; the dynamics only ever call move_edge.
class NetworkState {
 public:
  NetworkState(std::size_t n, std::uint64_t seed)
      : adjacency_(n), strategies_(n, Strategy::Defect), rng_(seed) {}

  static NetworkState from_edges(std::size_t n, std::span<const Edge> edges,
                                 std::span<const Strategy> strategies, std::uint64_t seed = 0) {
    if (strategies.size() != n) throw InvalidConfig("strategy vector must have N entries");
    NetworkState s(n, seed);
    for (const auto& [a, b] : edges) s.add_edge(a, b);
    for (std::size_t i = 0; i < n; ++i) s.set_strategy(static_cast<NodeId>(i), strategies[i]);
    return s;
  }

  std::size_t size() const { return adjacency_.size(); }
  std::size_t edge_count() const { return edges_; }

  std::span<const NodeId> neighbors(NodeId x) const {
    check_node(x);
    return adjacency_[x];
  }
  std::size_t degree(NodeId x) const { return neighbors(x).size(); }

  bool has_edge(NodeId a, NodeId b) const {
    check_node(a);
    check_node(b);
    const auto& small = adjacency_[a].size() <= adjacency_[b].size() ? adjacency_[a] : adjacency_[b];
    const NodeId other = adjacency_[a].size() <= adjacency_[b].size() ? b : a;
    return std::find(small.begin(), small.end(), other) != small.end();
  }

  void add_edge(NodeId a, NodeId b) {
    if (a == b) throw InvalidConfig("self-loops are not allowed");
    if (has_edge(a, b)) throw InvalidConfig("parallel edges are not allowed");
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
    ++edges_;
  }

  void remove_edge(NodeId a, NodeId b) {
    if (!has_edge(a, b)) throw NotNeighbors("no edge between " + std::to_string(a) + " and " + std::to_string(b));
    erase_half(a, b);
    erase_half(b, a);
    --edges_;
  }

  /// Replaces edge (a, b) with (a, z).
  void move_edge(NodeId a, NodeId b, NodeId z) {
    if (z == a || has_edge(a, z)) throw InvalidConfig("rewire target must be a new neighbor");
    remove_edge(a, b);
    add_edge(a, z);
  }

  Strategy strategy(NodeId x) const {
    check_node(x);
    return strategies_[x];
  }
  std::span<const Strategy> strategies() const { return strategies_; }

  void set_strategy(NodeId x, Strategy s) {
    check_node(x);
    if (strategies_[x] == s) return;
    strategies_[x] = s;
    cooperators_ += s == Strategy::Cooperate ? 1 : -1;
  }

  std::size_t cooperator_count() const { return static_cast<std::size_t>(cooperators_); }
  bool homogeneous() const { return cooperators_ == 0 || cooperator_count() == size(); }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edges_);
    for (NodeId a = 0; a < size(); ++a) {
      for (NodeId b : adjacency_[a]) {
        if (a < b) out.emplace_back(a, b);
      }
    }
    std::ranges::sort(out);
    return out;
  }

  bool connected() const {
    if (size() == 0) return true;
    std::vector<char> seen(size(), 0);
    std::queue<NodeId> frontier;
    frontier.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!frontier.empty()) {
      NodeId u = frontier.front();
      frontier.pop();
      for (NodeId v : adjacency_[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          ++reached;
          frontier.push(v);
        }
      }
    }
    return reached == size();
  }

  Rng& rng() { return rng_; }

  void check_node(NodeId x) const {
    if (x >= adjacency_.size()) throw UnknownNode("unknown node " + std::to_string(x));
  }

 private:
  void erase_half(NodeId a, NodeId b) {
    auto& list = adjacency_[a];
    auto it = std::find(list.begin(), list.end(), b);
    *it = list.back();
    list.pop_back();
  }

  std::vector<std::vector<NodeId>> adjacency_;
  std::vector<Strategy> strategies_;
  std::ptrdiff_t cooperators_ = 0;
  std::size_t edges_ = 0;
  Rng rng_;
};

/// Uniform simple graph with exactly N*k/2 edges, resampled until connected,
/// and independent initial strategies (C with probability init_coop).
inline NetworkState init_random_graph(const SimConfig& config, int max_attempts = 100) {
  config.validate();
  const std::size_t n = config.N;
  const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  NetworkState state(n, config.seed);
  Rng& rng = state.rng();

  const std::uint64_t wanted = config.edge_count();
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    NetworkState candidate(n, 0);
    // Selection sampling over pair indices; index p enumerates (a, b) with
    // a < b row by row, so pairs come out in increasing order.
    NodeId a = 0;
    std::uint64_t row_start = 0;
    std::uint64_t chosen = 0;
    for (std::uint64_t p = 0; p < pairs && chosen < wanted; ++p) {
      if (uniform_index(rng, pairs - p) >= wanted - chosen) continue;
      ++chosen;
      while (p >= row_start + (n - 1 - a)) {
        row_start += n - 1 - a;
        ++a;
      }
      candidate.add_edge(a, static_cast<NodeId>(a + 1 + (p - row_start)));
    }
    if (!candidate.connected()) continue;
    for (const auto& [u, v] : candidate.edges()) state.add_edge(u, v);
    for (NodeId x = 0; x < n; ++x) {
      state.set_strategy(x, uniform01(rng) < config.init_coop ? Strategy::Cooperate : Strategy::Defect);
    }
    return state;
  }
  throw ConnectivityFailure("no connected graph within " + std::to_string(max_attempts) + " attempts");
}

inline nlohmann::json to_json(const NetworkState& s) {
  nlohmann::json nodes = nlohmann::json::array();
  for (NodeId x = 0; x < s.size(); ++x) {
    nodes.push_back({{"id", x}, {"strategy", std::string(1, to_char(s.strategy(x)))}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : s.edges()) edges.push_back({a, b});
  return {{"nodes", nodes}, {"edges", edges}};
}

inline NetworkState state_from_json(const nlohmann::json& j, std::uint64_t seed = 0) {
  const auto& nodes = j.at("nodes");
  std::vector<Strategy> strategies(nodes.size(), Strategy::Defect);
  for (const auto& node : nodes) {
    const auto id = node.at("id").get<std::size_t>();
    if (id >= strategies.size()) throw ParseError("node id out of range");
    strategies[id] = node.at("strategy").get<std::string>() == "C" ? Strategy::Cooperate : Strategy::Defect;
  }
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
  return NetworkState::from_edges(strategies.size(), edges, strategies, seed);
}

}  // namespace coopnet
