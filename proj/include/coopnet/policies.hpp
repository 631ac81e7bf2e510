#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "coopnet/errors.hpp"
#include "coopnet/network.hpp"
#include "coopnet/rng.hpp"

namespace coopnet {

using MediatorId = std::uint32_t;

enum class StrategyFilter { DefectorsOnly, Any, CooperatorsOnly };
enum class DegreeSelector { Lowest, Random, Highest };

/// Restricts a candidate pool to the users of one mediator.
struct Exclusivity {
  std::span<const MediatorId> assignment;
  MediatorId mediator;
};

/// Nodes that focus x may rewire to after dropping y, in ascending order.
struct CandidatePool {
  std::vector<NodeId> members;

  bool empty() const { return members.empty(); }
  std::size_t size() const { return members.size(); }
  bool contains(NodeId z) const { return std::ranges::binary_search(members, z); }
};

inline CandidatePool candidate_pool(const NetworkState& state, NodeId x, NodeId y,
                                    const Exclusivity* exclusivity = nullptr) {
  state.check_node(x);
  state.check_node(y);
  std::vector<char> blocked(state.size(), 0);
  blocked[x] = 1;
  blocked[y] = 1;
  for (NodeId n : state.neighbors(x)) blocked[n] = 1;
  CandidatePool pool;
  for (NodeId z = 0; z < state.size(); ++z) {
    if (blocked[z]) continue;
    if (exclusivity && exclusivity->assignment[z] != exclusivity->mediator) continue;
    pool.members.push_back(z);
  }
  return pool;
}

/// Learned recommenders live in the policy-learning module; the heuristics
/// only need this hook to delegate to them.
class LearnedRecommender {
 public:
  virtual ~LearnedRecommender() = default;
  virtual std::optional<NodeId> recommend(const NetworkState& state, NodeId x, NodeId y,
                                          const CandidatePool& pool, Rng& rng) = 0;
};

struct NullPolicy {};
struct LocalPolicy {};
struct GridPolicy {
  StrategyFilter filter;
  DegreeSelector degree;
};
struct FairPolicy {};
struct LearnedPolicy {
  std::shared_ptr<LearnedRecommender> model;
};

struct RewirePolicy {
  std::variant<NullPolicy, LocalPolicy, GridPolicy, FairPolicy, LearnedPolicy> kind;
  std::string name;
};

namespace detail {

inline bool passes(StrategyFilter f, Strategy s) {
  switch (f) {
    case StrategyFilter::DefectorsOnly: return s == Strategy::Defect;
    case StrategyFilter::CooperatorsOnly: return s == Strategy::Cooperate;
    case StrategyFilter::Any: return true;
  }
  return false;
}

inline std::optional<NodeId> pick(std::span<const NodeId> nodes, Rng& rng) {
  if (nodes.empty()) return std::nullopt;
  return nodes[uniform_index(rng, nodes.size())];
}

inline std::optional<NodeId> recommend_grid(const GridPolicy& g, const NetworkState& state,
                                            const CandidatePool& pool, Rng& rng) {
  std::vector<NodeId> kept;
  kept.reserve(pool.size());
  for (NodeId z : pool.members) {
    if (passes(g.filter, state.strategy(z))) kept.push_back(z);
  }
  if (g.degree == DegreeSelector::Random || kept.empty()) return pick(kept, rng);

  const bool lowest = g.degree == DegreeSelector::Lowest;
  std::size_t best = lowest ? std::numeric_limits<std::size_t>::max() : 0;
  std::vector<NodeId> ties;
  for (NodeId z : kept) {
    const std::size_t d = state.degree(z);
    if (d == best) {
      ties.push_back(z);
    } else if (lowest ? d < best : d > best) {
      best = d;
      ties.assign(1, z);
    }
  }
  return pick(ties, rng);
}

}  // namespace detail

inline std::optional<NodeId> recommend(const RewirePolicy& policy, const NetworkState& state, NodeId x,
                                       NodeId y, const CandidatePool& pool, Rng& rng) {
  struct Visitor {
    const NetworkState& state;
    NodeId x, y;
    const CandidatePool& pool;
    Rng& rng;

    std::optional<NodeId> operator()(const NullPolicy&) const { return std::nullopt; }
    std::optional<NodeId> operator()(const LocalPolicy&) const {
      std::vector<NodeId> near;
      for (NodeId z : state.neighbors(y)) {
        if (pool.contains(z)) near.push_back(z);
      }
      std::ranges::sort(near);
      return detail::pick(near, rng);
    }
    std::optional<NodeId> operator()(const GridPolicy& g) const {
      return detail::recommend_grid(g, state, pool, rng);
    }
    std::optional<NodeId> operator()(const FairPolicy&) const {
      const auto filter = state.strategy(x) == Strategy::Cooperate ? StrategyFilter::CooperatorsOnly
                                                                    : StrategyFilter::DefectorsOnly;
      return detail::recommend_grid({filter, DegreeSelector::Random}, state, pool, rng);
    }
    std::optional<NodeId> operator()(const LearnedPolicy& l) const {
      if (!l.model) return std::nullopt;
      return l.model->recommend(state, x, y, pool, rng);
    }
  };
  return std::visit(Visitor{state, x, y, pool, rng}, policy.kind);
}

namespace detail {

inline std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

struct RegistryEntry {
  std::string_view name;
  std::variant<NullPolicy, LocalPolicy, GridPolicy, FairPolicy> kind;
};

inline const std::array<RegistryEntry, 14>& registry() {
  using F = StrategyFilter;
  using D = DegreeSelector;
  static const std::array<RegistryEntry, 14> entries{{
      {"NULL", NullPolicy{}},
      {"NO_MED", LocalPolicy{}},
      {"GOOD", GridPolicy{F::CooperatorsOnly, D::Random}},
      {"BAD", GridPolicy{F::DefectorsOnly, D::Random}},
      {"RANDOM", GridPolicy{F::Any, D::Random}},
      {"FAIR", FairPolicy{}},
      {"defect_min", GridPolicy{F::DefectorsOnly, D::Lowest}},
      {"defect_max", GridPolicy{F::DefectorsOnly, D::Highest}},
      {"any_min", GridPolicy{F::Any, D::Lowest}},
      {"any_max", GridPolicy{F::Any, D::Highest}},
      {"coop_min", GridPolicy{F::CooperatorsOnly, D::Lowest}},
      {"coop_max", GridPolicy{F::CooperatorsOnly, D::Highest}},
      // Proxies used for the learned optimizers in competition runs.
      {"ALIGNED", GridPolicy{F::CooperatorsOnly, D::Random}},
      {"ENGAGEMENT", GridPolicy{F::Any, D::Random}},
  }};
  return entries;
}

}  // namespace detail

/// Names accepted by policy_from_name, canonical spelling. The random-degree
/// grid cells are also reachable as defect_random / any_random / coop_random,
/// NO_MED as LOCAL.
inline std::vector<std::string> policy_names() {
  std::vector<std::string> out;
  for (const auto& e : detail::registry()) out.emplace_back(e.name);
  return out;
}

inline RewirePolicy policy_from_name(std::string_view name) {
  std::string key = detail::upper(name);
  if (key == "LOCAL") key = "NO_MED";
  if (key == "DEFECT_RANDOM") key = "BAD";
  if (key == "ANY_RANDOM") key = "RANDOM";
  if (key == "COOP_RANDOM") key = "GOOD";
  for (const auto& e : detail::registry()) {
    if (detail::upper(e.name) == key) {
      RewirePolicy p;
      std::visit([&](const auto& k) { p.kind = k; }, e.kind);
      p.name = std::string(e.name);
      return p;
    }
  }
  throw UnknownPolicyName("unknown policy name '" + std::string(name) + "'");
}

}  // namespace coopnet
