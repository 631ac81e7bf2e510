#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "coopnet/dynamics.hpp"
#include "coopnet/errors.hpp"
#include "coopnet/network.hpp"

namespace coopnet {

struct MediatorStats {
  std::string name;
  double share = 0.0;
  std::uint64_t rewire_requests = 0;

  bool operator==(const MediatorStats&) const = default;
};

/// Terminal metrics of one episode.
struct EpisodeResult {
  std::size_t N = 0;
  double coop_fraction = 0.0;
  StepCounters counters;
  double heterogeneity = 0.0;
  std::size_t max_degree = 0;
  std::uint64_t stop_time = 0;
  std::optional<std::vector<MediatorStats>> per_mediator;

  bool operator==(const EpisodeResult&) const = default;
};

inline double coop_fraction(const NetworkState& state) {
  return static_cast<double>(state.cooperator_count()) / static_cast<double>(state.size());
}

/// Population variance of the degree sequence.
inline double heterogeneity(const NetworkState& state) {
  const std::size_t n = state.size();
  double mean = 0.0;
  for (NodeId x = 0; x < n; ++x) mean += static_cast<double>(state.degree(x));
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (NodeId x = 0; x < n; ++x) {
    const double d = static_cast<double>(state.degree(x)) - mean;
    var += d * d;
  }
  return var / static_cast<double>(n);
}

inline std::size_t max_degree(const NetworkState& state) {
  std::size_t best = 0;
  for (NodeId x = 0; x < state.size(); ++x) best = std::max(best, state.degree(x));
  return best;
}

inline double rewires_per_opportunity(const StepCounters& c) {
  return static_cast<double>(c.rewires_executed) /
         static_cast<double>(std::max<std::uint64_t>(1, c.rewire_opportunities));
}

inline EpisodeResult summarize(const NetworkState& state, const StepCounters& counters) {
  EpisodeResult r;
  r.N = state.size();
  r.coop_fraction = coop_fraction(state);
  r.counters = counters;
  r.heterogeneity = heterogeneity(state);
  r.max_degree = max_degree(state);
  r.stop_time = counters.stop_time;
  return r;
}

enum class RewardKind { Cooperation, Engagement };

inline std::string to_string(RewardKind k) { return k == RewardKind::Cooperation ? "cooperation" : "engagement"; }

inline RewardKind reward_kind_from_name(const std::string& name) {
  if (name == "cooperation" || name == "coops" || name == "aligned") return RewardKind::Cooperation;
  if (name == "engagement" || name == "rewires") return RewardKind::Engagement;
  throw ValidationError("unknown reward kind '" + name + "'");
}

/// Cooperation: 2 * (coop_fraction - 0.5). Engagement: number of rewire
/// requests, taken from `mediator`'s own counter when given.
inline double reward(RewardKind kind, const EpisodeResult& result, std::optional<std::size_t> mediator = std::nullopt) {
  if (kind == RewardKind::Cooperation) return 2.0 * (result.coop_fraction - 0.5);
  if (mediator && result.per_mediator) {
    return static_cast<double>(result.per_mediator->at(*mediator).rewire_requests);
  }
  return static_cast<double>(result.counters.rewire_requests);
}

struct MetricStats {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single value
  double min = 0.0;
  double max = 0.0;
};

struct AggregateSummary {
  std::size_t replicates = 0;
  std::vector<std::pair<std::string, MetricStats>> metrics;

  const MetricStats& at(const std::string& name) const {
    for (const auto& [k, v] : metrics) {
      if (k == name) return v;
    }
    throw std::out_of_range("no metric " + name);
  }
};

// Values are sorted before reduction so the result does not depend on the
// order of the input list.
inline MetricStats describe(std::vector<double> values) {
  if (values.empty()) throw EmptyInput("no values to describe");
  std::ranges::sort(values);
  MetricStats s;
  s.min = values.front();
  s.max = values.back();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (s.min == s.max) {
    s.mean = s.min;
  } else if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

inline const std::vector<std::pair<std::string, std::function<double(const EpisodeResult&)>>>& metric_extractors() {
  static const std::vector<std::pair<std::string, std::function<double(const EpisodeResult&)>>> m{
      {"coop_fraction", [](const EpisodeResult& r) { return r.coop_fraction; }},
      {"rewire_requests", [](const EpisodeResult& r) { return static_cast<double>(r.counters.rewire_requests); }},
      {"rewires_executed", [](const EpisodeResult& r) { return static_cast<double>(r.counters.rewires_executed); }},
      {"rewire_opportunities",
       [](const EpisodeResult& r) { return static_cast<double>(r.counters.rewire_opportunities); }},
      {"rewires_per_opportunity", [](const EpisodeResult& r) { return rewires_per_opportunity(r.counters); }},
      {"heterogeneity", [](const EpisodeResult& r) { return r.heterogeneity; }},
      {"max_degree", [](const EpisodeResult& r) { return static_cast<double>(r.max_degree); }},
      {"stop_time", [](const EpisodeResult& r) { return static_cast<double>(r.stop_time); }},
  };
  return m;
}

inline AggregateSummary aggregate(std::span<const EpisodeResult> results) {
  if (results.empty()) throw EmptyInput("cannot aggregate an empty result list");
  AggregateSummary out;
  out.replicates = results.size();
  for (const auto& [name, get] : metric_extractors()) {
    std::vector<double> values;
    values.reserve(results.size());
    for (const auto& r : results) values.push_back(get(r));
    out.metrics.emplace_back(name, describe(std::move(values)));
  }
  return out;
}

inline nlohmann::json to_json(const AggregateSummary& s) {
  nlohmann::json j;
  j["replicates"] = s.replicates;
  for (const auto& [name, m] : s.metrics) {
    j["metrics"][name] = {{"mean", m.mean}, {"sd", m.sd}, {"min", m.min}, {"max", m.max}};
  }
  return j;
}

}  // namespace coopnet
