#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coopnet/config.hpp"
#include "coopnet/episode.hpp"
#include "coopnet/errors.hpp"
#include "coopnet/game.hpp"
#include "coopnet/learning/ranking_policy.hpp"
#include "coopnet/metrics.hpp"
#include "coopnet/network.hpp"
#include "coopnet/parallel.hpp"
#include "coopnet/policies.hpp"

namespace coopnet::learning {

struct Decision {
  Observation observation;
  NodeId action = 0;
  double log_prob = 0.0;
};

struct Trajectory {
  std::vector<Decision> decisions;
  // Training-scale terminal reward; engagement counts are divided by the
  // episode time limit.
  double reward = 0.0;
  double raw_reward = 0.0;
  EpisodeResult result;
};

/// Adapts a RankingPolicy to the recommender hook, logging each decision.
class RankingRecommender : public LearnedRecommender {
 public:
  RankingRecommender(std::shared_ptr<const RankingPolicy> policy, SelectionMode mode,
                     std::vector<Decision>* log = nullptr)
      : policy_(std::move(policy)), mode_(mode), log_(log) {}

  std::optional<NodeId> recommend(const NetworkState& state, NodeId x, NodeId, const CandidatePool& pool,
                                  Rng& rng) override {
    if (pool.empty()) return std::nullopt;
    Observation obs = featurize(state, x, pool);
    const auto d = policy_->distribution(obs);
    const NodeId action = select_action(d, obs.mask, mode_, rng);
    if (log_) log_->push_back({std::move(obs), action, std::log(d.probs[action])});
    return action;
  }

 private:
  std::shared_ptr<const RankingPolicy> policy_;
  SelectionMode mode_;
  std::vector<Decision>* log_;
};

inline RewirePolicy learned_policy(std::shared_ptr<const RankingPolicy> policy, SelectionMode mode,
                                   std::vector<Decision>* log = nullptr) {
  return {LearnedPolicy{std::make_shared<RankingRecommender>(std::move(policy), mode, log)}, "LEARNED"};
}

inline double training_reward(RewardKind kind, const EpisodeResult& r, const SimConfig& config) {
  const double raw = reward(kind, r);
  return kind == RewardKind::Engagement ? raw / static_cast<double>(config.time_limit) : raw;
}

/// One episode with the learned policy recommending for every node.
inline Trajectory rollout(const SimConfig& config, const GameMatrix& game, std::shared_ptr<const RankingPolicy> policy,
                          RewardKind kind, SelectionMode mode = SelectionMode::Train) {
  Trajectory t;
  MonopolyResolver resolver{learned_policy(std::move(policy), mode, &t.decisions)};
  t.result = run_episode(config, game, resolver);
  t.raw_reward = reward(kind, t.result);
  t.reward = training_reward(kind, t.result, config);
  return t;
}

enum class StepRule { Sgd, Adam };

struct OptimizerState {
  StepRule rule = StepRule::Adam;
  double learning_rate = 1e-2;
  double baseline_decay = 0.99;
  // Gradient norm cap; 0 disables clipping.
  double max_grad_norm = 0.0;
  // Divide advantages by a running reward standard deviation.
  bool normalize_advantage = true;
  double baseline = 0.0;
  double reward_variance = 1.0;
  bool baseline_ready = false;
  std::uint64_t updates = 0;
  // Adam moment estimates.
  Eigen::VectorXd m, v;

  double advantage_scale() const {
    return normalize_advantage ? 1.0 / std::max(std::sqrt(reward_variance), 1e-8) : 1.0;
  }
};

struct UpdateDiagnostics {
  std::uint64_t update = 0;
  double mean_reward = 0.0;
  double mean_raw_reward = 0.0;
  double mean_action_strategy = 0.0;
  double mean_action_degree = 0.0;
  double baseline = 0.0;
  double reward_sd = 0.0;
  double grad_norm = 0.0;
  std::size_t decisions = 0;
};

/// J(theta) = (scale/B) sum_traj (R - b) sum_t log pi(a_t | o_t), actions held fixed.
inline double batch_objective(const RankingPolicy& policy, std::span<const Trajectory> batch, double baseline,
                              double scale = 1.0) {
  double total = 0.0;
  for (const auto& t : batch) {
    double logp = 0.0;
    for (const auto& d : t.decisions) logp += policy.log_prob(d.observation, d.action);
    total += (t.reward - baseline) * logp;
  }
  return scale * total / static_cast<double>(batch.size());
}

inline Eigen::VectorXd batch_gradient(const RankingPolicy& policy, std::span<const Trajectory> batch, double baseline,
                                      double scale = 1.0) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.parameter_count()));
  scale /= static_cast<double>(batch.size());
  for (const auto& t : batch) {
    const double advantage = (t.reward - baseline) * scale;
    if (advantage == 0.0) continue;
    for (const auto& d : t.decisions) policy.accumulate_log_prob_gradient(d.observation, d.action, advantage, grad);
  }
  return grad;
}

/// Score-function ascent step with an exponential moving-average baseline
/// and (optionally) a running reward scale. Both start from the first
/// batch's statistics.
inline UpdateDiagnostics policy_gradient_update(RankingPolicy& policy, std::span<const Trajectory> batch,
                                                OptimizerState& opt) {
  if (batch.empty()) throw DegenerateBatch("empty batch");
  UpdateDiagnostics diag;
  double strategy_sum = 0.0, degree_sum = 0.0, reward_sum = 0.0, raw_sum = 0.0;
  for (const auto& t : batch) {
    reward_sum += t.reward;
    raw_sum += t.raw_reward;
    for (const auto& d : t.decisions) {
      const double n_minus_1 = static_cast<double>(d.observation.size() - 1);
      strategy_sum += d.observation.features(d.action, 0);
      degree_sum += d.observation.features(d.action, 1) * n_minus_1;
      ++diag.decisions;
    }
  }
  if (diag.decisions == 0) throw DegenerateBatch("no trajectory in the batch made a decision");
  const double mean_reward = reward_sum / static_cast<double>(batch.size());
  double batch_variance = 0.0;
  for (const auto& t : batch) batch_variance += (t.reward - mean_reward) * (t.reward - mean_reward);
  batch_variance /= static_cast<double>(batch.size());
  if (!opt.baseline_ready) {
    opt.baseline = mean_reward;
    opt.reward_variance = batch_variance > 0.0 ? batch_variance : 1.0;
    opt.baseline_ready = true;
  }

  Eigen::VectorXd grad = batch_gradient(policy, batch, opt.baseline, opt.advantage_scale());
  diag.grad_norm = grad.norm();
  if (opt.max_grad_norm > 0.0 && diag.grad_norm > opt.max_grad_norm) grad *= opt.max_grad_norm / diag.grad_norm;
  if (opt.rule == StepRule::Adam) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (opt.m.size() != grad.size()) {
      opt.m = Eigen::VectorXd::Zero(grad.size());
      opt.v = Eigen::VectorXd::Zero(grad.size());
    }
    opt.m = b1 * opt.m + (1.0 - b1) * grad;
    opt.v = b2 * opt.v + (1.0 - b2) * grad.cwiseAbs2();
    const double t = static_cast<double>(opt.updates + 1);
    const Eigen::VectorXd m_hat = opt.m / (1.0 - std::pow(b1, t));
    const Eigen::VectorXd v_hat = opt.v / (1.0 - std::pow(b2, t));
    policy.set_theta(policy.theta() + opt.learning_rate * (m_hat.array() / (v_hat.array().sqrt() + eps)).matrix());
  } else {
    policy.set_theta(policy.theta() + opt.learning_rate * grad);
  }

  diag.baseline = opt.baseline;
  diag.reward_sd = std::sqrt(opt.reward_variance);
  const double deviation = mean_reward - opt.baseline;
  opt.reward_variance = opt.baseline_decay * opt.reward_variance +
                        (1.0 - opt.baseline_decay) * (batch_variance + deviation * deviation);
  opt.baseline = opt.baseline_decay * opt.baseline + (1.0 - opt.baseline_decay) * mean_reward;
  diag.update = opt.updates++;
  diag.mean_reward = mean_reward;
  diag.mean_raw_reward = raw_sum / static_cast<double>(batch.size());
  diag.mean_action_strategy = strategy_sum / static_cast<double>(diag.decisions);
  diag.mean_action_degree = degree_sum / static_cast<double>(diag.decisions);
  return diag;
}

struct TrainOptions {
  std::size_t updates = 300;
  std::size_t batch_size = 16;
  double learning_rate = 1e-2;
  double baseline_decay = 0.99;
  double max_grad_norm = 0.0;
  StepRule rule = StepRule::Adam;
  RankingArchitecture architecture;
  std::size_t jobs = 1;
};

struct TrainingRun {
  RankingPolicy policy;
  std::vector<UpdateDiagnostics> log;
};

/// Trains from a seeded random initialization. Episode seeds are
/// derive_seed(config.seed, 1000 + update * batch_size + i), so rollouts are
/// reproducible regardless of the worker count.
inline TrainingRun train(const SimConfig& config, const GameMatrix& game, RewardKind kind, const TrainOptions& options,
                         const std::function<void(const UpdateDiagnostics&)>& on_update = {}) {
  config.validate();
  TrainingRun run{RankingPolicy::random(options.architecture, derive_seed(config.seed, 7)), {}};
  OptimizerState opt;
  opt.learning_rate = options.learning_rate;
  opt.baseline_decay = options.baseline_decay;
  opt.max_grad_norm = options.max_grad_norm;
  opt.rule = options.rule;
  std::vector<Trajectory> batch(options.batch_size);
  for (std::size_t u = 0; u < options.updates; ++u) {
    auto frozen = std::make_shared<const RankingPolicy>(run.policy);
    parallel_for(options.batch_size, options.jobs, [&](std::size_t i) {
      SimConfig c = config;
      c.seed = derive_seed(config.seed, 1000 + u * options.batch_size + i);
      batch[i] = rollout(c, game, frozen, kind, SelectionMode::Train);
    });
    UpdateDiagnostics diag;
    try {
      diag = policy_gradient_update(run.policy, batch, opt);
    } catch (const DegenerateBatch&) {
      diag.update = opt.updates++;
      diag.baseline = opt.baseline;
    }
    run.log.push_back(diag);
    if (on_update) on_update(diag);
  }
  return run;
}

struct Evaluation {
  double mean_reward = 0.0;
  std::vector<EpisodeResult> results;
  AggregateSummary summary;
};

/// Argmax-mode rollouts on seeds seed + i for i in [0, episodes).
inline Evaluation evaluate_policy(std::shared_ptr<const RankingPolicy> policy, const SimConfig& config,
                                  const GameMatrix& game, RewardKind kind, std::size_t episodes, std::size_t jobs = 1) {
  if (episodes == 0) throw InvalidConfig("episodes must be at least 1");
  Evaluation e;
  e.results.resize(episodes);
  std::vector<double> rewards(episodes);
  parallel_for(episodes, jobs, [&](std::size_t i) {
    SimConfig c = config;
    c.seed = config.seed + i;
    auto t = rollout(c, game, policy, kind, SelectionMode::Eval);
    rewards[i] = t.raw_reward;
    e.results[i] = std::move(t.result);
  });
  e.mean_reward = describe(rewards).mean;
  e.summary = aggregate(e.results);
  return e;
}

/// The same evaluation protocol for a heuristic, used as the baseline oracle.
inline Evaluation evaluate_heuristic(const RewirePolicy& heuristic, const SimConfig& config, const GameMatrix& game,
                                     RewardKind kind, std::size_t episodes, std::size_t jobs = 1) {
  Evaluation e;
  e.results.resize(episodes);
  std::vector<double> rewards(episodes);
  parallel_for(episodes, jobs, [&](std::size_t i) {
    SimConfig c = config;
    c.seed = config.seed + i;
    e.results[i] = run_episode(c, game, heuristic);
    rewards[i] = reward(kind, e.results[i]);
  });
  e.mean_reward = describe(rewards).mean;
  e.summary = aggregate(e.results);
  return e;
}

/// Single-decision task: a random graph, a random focus and dissatisfying
/// neighbor; reward 1 iff the recommended node cooperates.
inline Trajectory bandit_rollout(const RankingPolicy& policy, const SimConfig& config, SelectionMode mode) {
  NetworkState state = init_random_graph(config);
  Trajectory t;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const auto [x, y] = sample_pair(state);
    const auto pool = candidate_pool(state, x, y);
    if (pool.empty()) continue;
    Observation obs = featurize(state, x, pool);
    const auto d = policy.distribution(obs);
    const NodeId a = select_action(d, obs.mask, mode, state.rng());
    t.reward = t.raw_reward = state.strategy(a) == Strategy::Cooperate ? 1.0 : 0.0;
    t.decisions.push_back({std::move(obs), a, std::log(d.probs[a])});
    break;
  }
  t.result = summarize(state, {});
  return t;
}

}  // namespace coopnet::learning
