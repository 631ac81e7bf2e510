#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coopnet/config.hpp"
#include "coopnet/dynamics.hpp"
#include "coopnet/errors.hpp"
#include "coopnet/metrics.hpp"
#include "coopnet/network.hpp"
#include "coopnet/parallel.hpp"
#include "coopnet/policies.hpp"
#include "coopnet/rng.hpp"

namespace coopnet {

struct MixEntry {
  std::string policy;
  double fraction = 0.0;

  bool operator==(const MixEntry&) const = default;
};

/// Which recommender (mediator) each node uses.
struct MediatorAssignment {
  std::vector<MediatorId> of_node;
  std::vector<RewirePolicy> registry;

  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> c(registry.size(), 0);
    for (MediatorId m : of_node) ++c.at(m);
    return c;
  }

  std::vector<double> shares() const {
    std::vector<double> s;
    for (std::size_t c : counts()) s.push_back(static_cast<double>(c) / static_cast<double>(of_node.size()));
    return s;
  }

  std::set<MediatorId> present() const { return {of_node.begin(), of_node.end()}; }
};

struct CompetitionConfig {
  SimConfig base;
  // Ratio of mediator-imitation to all other updates; kInfinity means every
  // step is a mediator update.
  double W2 = 0.0;
  double beta_med = 0.05;
  std::vector<MixEntry> initial_mix;

  void validate() const {
    base.validate();
    if (!(W2 >= 0.0)) throw InvalidConfig("W2 must be non-negative");
    if (!(beta_med > 0.0) || !std::isfinite(beta_med)) throw InvalidConfig("beta_med must be positive");
    validate_mix(initial_mix);
  }

  static void validate_mix(const std::vector<MixEntry>& mix) {
    if (mix.empty()) throw InvalidMix("mix must name at least one policy");
    double total = 0.0;
    for (const auto& e : mix) {
      if (!(e.fraction >= 0.0)) throw InvalidMix("mix fractions must be non-negative");
      policy_from_name(e.policy);
      total += e.fraction;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidMix("mix fractions must sum to 1, got " + std::to_string(total));
  }
};

/// Exact proportional allocation (largest remainder, ties to the earlier
/// entry) followed by a uniform shuffle of the node labels.
inline MediatorAssignment assign_initial_mediators(std::size_t n, const std::vector<MixEntry>& mix, Rng& rng) {
  CompetitionConfig::validate_mix(mix);
  MediatorAssignment a;
  std::vector<std::size_t> quota(mix.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t used = 0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    a.registry.push_back(policy_from_name(mix[i].policy));
    const double exact = mix[i].fraction * static_cast<double>(n);
    quota[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    used += quota[i];
    remainders.emplace_back(exact - static_cast<double>(quota[i]), i);
  }
  std::ranges::stable_sort(remainders, [](const auto& l, const auto& r) { return l.first > r.first; });
  for (std::size_t j = 0; used < n; ++j, ++used) ++quota[remainders[j % remainders.size()].second];
  for (std::size_t i = 0; i < mix.size(); ++i) a.of_node.insert(a.of_node.end(), quota[i], static_cast<MediatorId>(i));
  a.of_node.resize(n);
  std::shuffle(a.of_node.begin(), a.of_node.end(), rng);
  return a;
}

/// x adopts y's mediator with probability fermi(payoff(y) - payoff(x), beta_med),
/// decided by the uniform draw `u`.
inline bool mediator_update(NetworkState& state, MediatorAssignment& assignment, const GameMatrix& game,
                            NodeId x, NodeId y, double beta_med, double u) {
  require_edge(state, x, y);
  const double p = fermi(cumulative_payoff(state, game, y) - cumulative_payoff(state, game, x), beta_med);
  if (u >= p || assignment.of_node[x] == assignment.of_node[y]) return false;
  assignment.of_node[x] = assignment.of_node[y];
  return true;
}

inline bool mediator_update(NetworkState& state, MediatorAssignment& assignment, const GameMatrix& game,
                            NodeId x, NodeId y, double beta_med) {
  require_edge(state, x, y);
  return mediator_update(state, assignment, game, x, y, beta_med, uniform01(state.rng()));
}

/// Routes each request to the owner's mediator, restricted to that
/// mediator's own users, and counts requests per mediator.
struct CompetitionResolver {
  const MediatorAssignment* assignment;
  std::vector<std::uint64_t> requests;

  explicit CompetitionResolver(const MediatorAssignment& a) : assignment(&a), requests(a.registry.size(), 0) {}

  std::optional<NodeId> operator()(NetworkState& state, NodeId owner, NodeId dropped) {
    const MediatorId m = assignment->of_node[owner];
    const Exclusivity exclusive{assignment->of_node, m};
    const auto pool = candidate_pool(state, owner, dropped, &exclusive);
    ++requests[m];
    return recommend(assignment->registry[m], state, owner, dropped, pool, state.rng());
  }
};

inline double mediator_update_probability(double w2) {
  if (w2 == kInfinity) return 1.0;
  return w2 / (1.0 + w2);
}

/// With probability W2/(1+W2) a mediator update on a freshly sampled pair,
/// otherwise a regular strategy/structural step. No draw is taken when
/// W2 == 0, so such runs follow the single-recommender draw schedule exactly.
inline StepOutcome competition_step(NetworkState& state, MediatorAssignment& assignment,
                                    const CompetitionConfig& config, const GameMatrix& game,
                                    CompetitionResolver& resolver, StepCounters& counters) {
  if (config.W2 > 0.0 && uniform01(state.rng()) < mediator_update_probability(config.W2)) {
    StepOutcome out;
    out.kind = UpdateKind::Mediator;
    std::tie(out.x, out.y) = sample_pair(state);
    ++counters.steps;
    ++counters.mediator_updates;
    mediator_update(state, assignment, game, out.x, out.y, config.beta_med);
    return out;
  }
  return simulation_step(state, game, config.base, resolver, counters);
}

struct CompetitionEpisode {
  EpisodeResult result;
  std::vector<double> initial_shares;
};

template <class Observer>
CompetitionEpisode run_competition_episode(const CompetitionConfig& config, const GameMatrix& game,
                                           Observer&& observer) {
  config.validate();
  NetworkState state = init_random_graph(config.base);
  Rng assign_rng(derive_seed(config.base.seed, 1));
  MediatorAssignment assignment = assign_initial_mediators(config.base.N, config.initial_mix, assign_rng);
  CompetitionEpisode out;
  out.initial_shares = assignment.shares();

  CompetitionResolver resolver(assignment);
  StepCounters counters;
  while (counters.steps < config.base.time_limit && !state.homogeneous()) {
    const StepOutcome step = competition_step(state, assignment, config, game, resolver, counters);
    observer(state, assignment, counters, step);
  }
  counters.stop_time = counters.steps;
  out.result = summarize(state, counters);
  std::vector<MediatorStats> stats;
  const auto shares = assignment.shares();
  for (std::size_t m = 0; m < assignment.registry.size(); ++m) {
    stats.push_back({config.initial_mix[m].policy, shares[m], resolver.requests[m]});
  }
  out.result.per_mediator = std::move(stats);
  return out;
}

inline CompetitionEpisode run_competition_episode(const CompetitionConfig& config, const GameMatrix& game) {
  return run_competition_episode(config, game, [](const auto&...) {});
}

struct AdoptionSummary {
  std::vector<std::string> mediators;
  std::vector<double> initial_shares;
  // final_shares[m][run]
  std::vector<std::vector<double>> final_shares;
  std::vector<EpisodeResult> runs;
  std::size_t starting_majority = 0;
  double mean_coop_fraction = 0.0;
  double mean_rewire_requests = 0.0;
  double final_prop_start_majority = 0.0;

  std::vector<double> mean_final_shares() const {
    std::vector<double> out;
    for (const auto& s : final_shares) out.push_back(describe(s).mean);
    return out;
  }
};

/// `runs` independent episodes with seeds base.seed + i.
inline AdoptionSummary run_adoption_experiment(const CompetitionConfig& config, const GameMatrix& game,
                                               std::size_t runs, std::size_t jobs = 1) {
  if (runs == 0) throw InvalidConfig("runs must be at least 1");
  config.validate();
  std::vector<CompetitionEpisode> episodes(runs);
  parallel_for(runs, jobs, [&](std::size_t i) {
    CompetitionConfig c = config;
    c.base.seed = config.base.seed + i;
    episodes[i] = run_competition_episode(c, game);
  });

  AdoptionSummary s;
  for (const auto& e : config.initial_mix) s.mediators.push_back(e.policy);
  s.initial_shares = episodes.front().initial_shares;
  s.starting_majority = static_cast<std::size_t>(
      std::distance(s.initial_shares.begin(), std::ranges::max_element(s.initial_shares)));
  s.final_shares.assign(s.mediators.size(), {});
  std::vector<double> coop, requests, majority;
  for (auto& e : episodes) {
    for (std::size_t m = 0; m < s.mediators.size(); ++m) {
      s.final_shares[m].push_back(e.result.per_mediator->at(m).share);
    }
    coop.push_back(e.result.coop_fraction);
    requests.push_back(static_cast<double>(e.result.counters.rewire_requests));
    majority.push_back(e.result.per_mediator->at(s.starting_majority).share);
    s.runs.push_back(std::move(e.result));
  }
  s.mean_coop_fraction = describe(coop).mean;
  s.mean_rewire_requests = describe(requests).mean;
  s.final_prop_start_majority = describe(majority).mean;
  return s;
}

inline nlohmann::json to_json(const AdoptionSummary& s) {
  nlohmann::json j;
  nlohmann::json mediators = nlohmann::json::array();
  const auto means = s.mean_final_shares();
  for (std::size_t m = 0; m < s.mediators.size(); ++m) {
    mediators.push_back({{"policy", s.mediators[m]},
                         {"initial_share", s.initial_shares[m]},
                         {"mean_final_share", means[m]},
                         {"final_shares", s.final_shares[m]}});
  }
  j["mediators"] = mediators;
  j["runs"] = s.runs.size();
  j["table"] = {{"coops", s.mean_coop_fraction},
                {"rewire", s.mean_rewire_requests},
                {"final_prop_start_majority", s.mediators.size() > 1 ? nlohmann::json(s.final_prop_start_majority)
                                                                      : nlohmann::json(nullptr)}};
  return j;
}

}  // namespace coopnet
