#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "coopnet/errors.hpp"

namespace coopnet {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct SimConfig {
  std::size_t N = 10;
  std::size_t k = 4;
  double beta = 0.1;
  // Ratio of structural to strategy timescales. kInfinity disables strategy
  // updates, 0 disables rewiring.
  double W = 1.0;
  std::uint64_t time_limit = 1000;
  std::uint64_t seed = 0;
  // Probability that a node starts as a cooperator.
  double init_coop = 0.5;

  void validate() const {
    if (N < 2) throw InvalidConfig("N must be at least 2");
    if (k < 2 || k >= N) throw InvalidConfig("k must satisfy 2 <= k < N");
    if ((N * k) % 2 != 0) throw InvalidConfig("N*k must be even");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidConfig("beta must be positive and finite");
    if (!(W >= 0.0)) throw InvalidConfig("W must be non-negative");
    if (time_limit == 0) throw InvalidConfig("time_limit must be positive");
    if (!(init_coop >= 0.0 && init_coop <= 1.0)) throw InvalidConfig("init_coop must lie in [0, 1]");
  }

  std::size_t edge_count() const { return N * k / 2; }
};

/// Rows of the environment configuration table (N, beta, k, time limit).
struct EnvironmentPreset {
  std::size_t N;
  double beta;
  std::size_t k;
  std::uint64_t time_limit;
};

inline std::optional<EnvironmentPreset> environment_preset(std::size_t n) {
  switch (n) {
    case 10: return EnvironmentPreset{10, 0.1, 4, 1000};
    case 30: return EnvironmentPreset{30, 0.05, 8, 3000};
    case 100: return EnvironmentPreset{100, 0.005, 28, 10000};
    case 500: return EnvironmentPreset{500, 0.005, 30, 30000};
    default: return std::nullopt;
  }
}

inline SimConfig preset_config(std::size_t n, double w = 1.0, std::uint64_t seed = 0) {
  auto p = environment_preset(n);
  if (!p) throw InvalidConfig("no environment preset for N=" + std::to_string(n));
  SimConfig c;
  c.N = p->N;
  c.k = p->k;
  c.beta = p->beta;
  c.time_limit = p->time_limit;
  c.W = w;
  c.seed = seed;
  return c;
}

}  // namespace coopnet
