#pragma once

#include <random>
#include <string>
#include <vector>

#include "coopnet/network.hpp"

namespace coopnet::testing {

inline std::vector<Strategy> strategies_from(const std::string& s) {
  std::vector<Strategy> out;
  for (char c : s) out.push_back(c == 'C' ? Strategy::Cooperate : Strategy::Defect);
  return out;
}

inline NetworkState make_state(const std::vector<Edge>& edges, const std::string& strategies,
                               std::uint64_t seed = 0) {
  const auto s = strategies_from(strategies);
  return NetworkState::from_edges(s.size(), edges, s, seed);
}

inline NetworkState path_graph(std::size_t n, const std::string& strategies) {
  std::vector<Edge> edges;
  for (NodeId i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return make_state(edges, strategies);
}

inline NetworkState complete_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) edges.emplace_back(a, b);
  }
  return make_state(edges, std::string(n, 'C'));
}

/// Erdos-Renyi G(n, p) with random strategies, built independently of the
/// library's generator; may be disconnected.
inline NetworkState random_state(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937 gen(static_cast<std::uint32_t>(seed));
  std::bernoulli_distribution edge(p), coop(0.5);
  std::vector<Edge> edges;
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) {
      if (edge(gen)) edges.emplace_back(a, b);
    }
  }
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += coop(gen) ? 'C' : 'D';
  return make_state(edges, s, seed);
}

/// Adjacency matrix view for brute-force oracles.
inline std::vector<std::vector<char>> adjacency_matrix(const NetworkState& s) {
  std::vector<std::vector<char>> m(s.size(), std::vector<char>(s.size(), 0));
  for (const auto& [a, b] : s.edges()) m[a][b] = m[b][a] = 1;
  return m;
}

}  // namespace coopnet::testing
