#pragma once

#include "coopnet/config.hpp"
#include "coopnet/dynamics.hpp"
#include "coopnet/metrics.hpp"
#include "coopnet/network.hpp"

namespace coopnet {

struct NoStepObserver {
  void operator()(const NetworkState&, const StepCounters&, const StepOutcome&) const {}
};

/// Steps `state` until the time limit or until strategies are homogeneous
/// (imitation cannot reintroduce the missing strategy, so the run is frozen).
template <PolicyResolver Resolver, class Observer = NoStepObserver>
EpisodeResult run_episode(NetworkState& state, const SimConfig& config, const GameMatrix& game,
                          Resolver& resolver, Observer&& observer = {}) {
  StepCounters counters;
  while (counters.steps < config.time_limit && !state.homogeneous()) {
    const StepOutcome outcome = simulation_step(state, game, config, resolver, counters);
    observer(state, counters, outcome);
  }
  counters.stop_time = counters.steps;
  return summarize(state, counters);
}

template <PolicyResolver Resolver>
EpisodeResult run_episode(const SimConfig& config, const GameMatrix& game, Resolver& resolver) {
  NetworkState state = init_random_graph(config);
  return run_episode(state, config, game, resolver);
}

inline EpisodeResult run_episode(const SimConfig& config, const GameMatrix& game, const RewirePolicy& policy) {
  MonopolyResolver resolver{policy};
  return run_episode(config, game, resolver);
}

}  // namespace coopnet
