#pragma once

#include <concepts>
#include <cstdint>
#include <optional>
#include <string>

#include "coopnet/config.hpp"
#include "coopnet/errors.hpp"
#include "coopnet/game.hpp"
#include "coopnet/network.hpp"
#include "coopnet/policies.hpp"
#include "coopnet/rng.hpp"

namespace coopnet {

/// Event counters of one run. Ordering invariant:
/// rewires_executed <= rewire_requests <= rewire_opportunities
///   <= structural_updates <= steps, and
/// steps == strategy_updates + structural_updates (+ mediator_updates in
/// competition runs).
struct StepCounters {
  std::uint64_t steps = 0;
  std::uint64_t strategy_updates = 0;
  std::uint64_t structural_updates = 0;
  std::uint64_t mediator_updates = 0;
  std::uint64_t rewire_opportunities = 0;
  std::uint64_t rewire_requests = 0;
  std::uint64_t rewires_executed = 0;
  std::uint64_t stop_time = 0;

  bool consistent() const {
    return rewires_executed <= rewire_requests && rewire_requests <= rewire_opportunities &&
           rewire_opportunities <= structural_updates && structural_updates <= steps &&
           steps == strategy_updates + structural_updates + mediator_updates;
  }
  bool operator==(const StepCounters&) const = default;
};

/// Maps a requesting node to a recommendation: (state, owner, dropped) ->
/// new neighbor for owner, or nullopt when its recommender has none.
template <class R>
concept PolicyResolver = requires(R r, NetworkState& s, NodeId a, NodeId b) {
  { r(s, a, b) } -> std::convertible_to<std::optional<NodeId>>;
};

/// Every node uses the same recommender.
struct MonopolyResolver {
  RewirePolicy policy;

  std::optional<NodeId> operator()(NetworkState& state, NodeId owner, NodeId dropped) const {
    const auto pool = candidate_pool(state, owner, dropped);
    return recommend(policy, state, owner, dropped, pool, state.rng());
  }
};

inline double cumulative_payoff(const NetworkState& state, const GameMatrix& game, NodeId x) {
  const Strategy own = state.strategy(x);
  double total = 0.0;
  for (NodeId y : state.neighbors(x)) total += game.payoff(own, state.strategy(y));
  return total;
}

inline void require_edge(const NetworkState& state, NodeId x, NodeId y) {
  if (!state.has_edge(x, y)) {
    throw NotNeighbors(std::to_string(x) + " and " + std::to_string(y) + " are not neighbors");
  }
}

/// x imitates y with probability fermi(payoff(y) - payoff(x), beta), decided
/// by the uniform draw `u`. Returns true when x's strategy actually changed.
inline bool strategy_update(NetworkState& state, const GameMatrix& game, double beta, NodeId x, NodeId y, double u) {
  require_edge(state, x, y);
  const double p = fermi(cumulative_payoff(state, game, y) - cumulative_payoff(state, game, x), beta);
  if (u >= p || state.strategy(x) == state.strategy(y)) return false;
  state.set_strategy(x, state.strategy(y));
  return true;
}

inline bool strategy_update(NetworkState& state, const GameMatrix& game, double beta, NodeId x, NodeId y) {
  require_edge(state, x, y);
  return strategy_update(state, game, beta, x, y, uniform01(state.rng()));
}

enum class RewireKind {
  NoAction,       // y cooperates: x is satisfied
  Declined,       // C-D pair, x lost the Fermi draw and keeps the link
  NoCandidate,    // a recommendation was requested but none was returned
  Rewired,
};

struct RewireOutcome {
  RewireKind kind = RewireKind::NoAction;
  std::optional<NodeId> owner;    // node whose recommender was queried
  std::optional<NodeId> dropped;  // neighbor the owner disconnects from
  std::optional<NodeId> target;   // new neighbor
};

/// `draw()` supplies the uniform variate for the Fermi contest; it is only
/// called when y defects.
template <PolicyResolver Resolver, std::invocable Draw>
RewireOutcome structural_update(NetworkState& state, const GameMatrix& game, double beta, Resolver& resolver,
                                NodeId x, NodeId y, StepCounters& counters, Draw&& draw) {
  require_edge(state, x, y);
  ++counters.structural_updates;
  RewireOutcome out;
  if (state.strategy(y) == Strategy::Cooperate) return out;

  ++counters.rewire_opportunities;
  const double p = fermi(cumulative_payoff(state, game, x) - cumulative_payoff(state, game, y), beta);
  const bool focus_wins = draw() < p;
  if (!focus_wins && state.strategy(x) == Strategy::Cooperate) {
    out.kind = RewireKind::Declined;
    return out;
  }
  const NodeId owner = focus_wins ? x : y;
  const NodeId dropped = focus_wins ? y : x;
  out.owner = owner;
  out.dropped = dropped;
  ++counters.rewire_requests;
  const std::optional<NodeId> z = resolver(state, owner, dropped);
  if (!z) {
    out.kind = RewireKind::NoCandidate;
    return out;
  }
  state.move_edge(owner, dropped, *z);
  ++counters.rewires_executed;
  out.kind = RewireKind::Rewired;
  out.target = z;
  return out;
}

template <PolicyResolver Resolver>
RewireOutcome structural_update(NetworkState& state, const GameMatrix& game, double beta, Resolver& resolver,
                                NodeId x, NodeId y, StepCounters& counters) {
  return structural_update(state, game, beta, resolver, x, y, counters, [&state] { return uniform01(state.rng()); });
}

enum class UpdateKind { Strategy, Structural, Mediator };

struct StepOutcome {
  UpdateKind kind = UpdateKind::Strategy;
  NodeId x = 0;
  NodeId y = 0;
  bool strategy_changed = false;
  RewireOutcome rewire;
};

/// Uniform focus node with at least one neighbor, then a uniform neighbor.
inline std::pair<NodeId, NodeId> sample_pair(NetworkState& state) {
  Rng& rng = state.rng();
  const std::size_t attempts = 64 * state.size();
  for (std::size_t i = 0; i < attempts; ++i) {
    const auto x = static_cast<NodeId>(uniform_index(rng, state.size()));
    const auto nbrs = state.neighbors(x);
    if (nbrs.empty()) continue;
    return {x, nbrs[uniform_index(rng, nbrs.size())]};
  }
  throw IsolatedFocusNode("could not sample a focus node with neighbors");
}

/// Probability that a step is a strategy update, (1 + W)^-1.
inline double strategy_update_probability(double w) { return w == kInfinity ? 0.0 : 1.0 / (1.0 + w); }

template <PolicyResolver Resolver>
StepOutcome simulation_step(NetworkState& state, const GameMatrix& game, const SimConfig& config,
                            Resolver& resolver, StepCounters& counters) {
  StepOutcome out;
  std::tie(out.x, out.y) = sample_pair(state);
  ++counters.steps;
  if (uniform01(state.rng()) < strategy_update_probability(config.W)) {
    out.kind = UpdateKind::Strategy;
    ++counters.strategy_updates;
    out.strategy_changed = strategy_update(state, game, config.beta, out.x, out.y);
  } else {
    out.kind = UpdateKind::Structural;
    out.rewire = structural_update(state, game, config.beta, resolver, out.x, out.y, counters);
  }
  return out;
}

}  // namespace coopnet
