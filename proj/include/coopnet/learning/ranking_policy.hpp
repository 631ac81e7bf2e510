#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coopnet/errors.hpp"
#include "coopnet/network.hpp"
#include "coopnet/policies.hpp"
#include "coopnet/rng.hpp"

namespace coopnet::learning {

/// What the ranking module sees when a recommendation is requested.
struct Observation {
  std::vector<std::vector<NodeId>> adjacency;
  NodeId focus = 0;
  // One row per node: (strategy with D=0 / C=1, degree / (N-1)).
  Eigen::MatrixXd features;
  std::vector<char> mask;

  std::size_t size() const { return mask.size(); }
  bool any_valid() const {
    for (char m : mask) {
      if (m) return true;
    }
    return false;
  }
};

inline constexpr int kFeatureDim = 2;

inline Observation featurize(const NetworkState& state, NodeId x, const CandidatePool& pool) {
  state.check_node(x);
  const std::size_t n = state.size();
  Observation obs;
  obs.focus = x;
  obs.adjacency.resize(n);
  obs.features.resize(static_cast<Eigen::Index>(n), kFeatureDim);
  obs.mask.assign(n, 0);
  const double norm = n > 1 ? static_cast<double>(n - 1) : 1.0;
  for (NodeId i = 0; i < n; ++i) {
    const auto nbrs = state.neighbors(i);
    obs.adjacency[i].assign(nbrs.begin(), nbrs.end());
    obs.features(i, 0) = state.strategy(i) == Strategy::Cooperate ? 1.0 : 0.0;
    obs.features(i, 1) = static_cast<double>(nbrs.size()) / norm;
  }
  for (NodeId z : pool.members) obs.mask[z] = 1;
  return obs;
}

/// Mask excludes x, its neighbors and (when given) the dissatisfying neighbor y.
inline Observation featurize(const NetworkState& state, NodeId x, std::optional<NodeId> y = std::nullopt) {
  return featurize(state, x, candidate_pool(state, x, y.value_or(x)));
}

struct RankingArchitecture {
  int hidden_width = 32;
  // 0 makes S a single linear layer; otherwise S gets one tanh layer of this width.
  int score_width = 0;

  bool operator==(const RankingArchitecture&) const = default;
};

struct ActionDistribution {
  Eigen::VectorXd scores;
  std::vector<double> probs;  // exactly 0 for masked nodes
};

/// Ranking module: a one-hidden-layer tanh perceptron H embeds every node,
/// h_g sums the embeddings over all nodes, and the score module S maps
/// (h_g, h_f, h_i) to a scalar score per node.
///
/// All parameters live in one flat vector theta, laid out as
/// [W1 (hidden x 2), b1, U (score x 3*hidden), c, v, b0], matrices column-major.
/// With score_width 0, U and c are empty and v has 3*hidden entries, so
/// score_i = v . (h_g, h_f, h_i) + b0.
class RankingPolicy {
 public:
  using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
  using Map = Eigen::Map<Eigen::MatrixXd>;

  explicit RankingPolicy(RankingArchitecture arch = {})
      : arch_(checked(arch)), theta_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(count(arch)))) {}

  static RankingPolicy random(RankingArchitecture arch, std::uint64_t seed, double scale = 0.1) {
    RankingPolicy p(arch);
    Rng rng(seed);
    for (Eigen::Index i = 0; i < p.theta_.size(); ++i) p.theta_[i] = (2.0 * uniform01(rng) - 1.0) * scale;
    return p;
  }

  static std::size_t count(const RankingArchitecture& a) {
    checked(a);
    const std::size_t h = static_cast<std::size_t>(a.hidden_width), s = static_cast<std::size_t>(a.score_width);
    if (s == 0) return h * kFeatureDim + h + 3 * h + 1;
    return h * kFeatureDim + h + s * 3 * h + s + s + 1;
  }

  const RankingArchitecture& architecture() const { return arch_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(theta_.size()); }
  const Eigen::VectorXd& theta() const { return theta_; }
  void set_theta(const Eigen::VectorXd& t) {
    if (t.size() != theta_.size()) throw InvalidConfig("parameter vector has the wrong length");
    theta_ = t;
  }

  ConstMap w1() const { return block(theta_, 0, h(), kFeatureDim); }
  ConstMap b1() const { return block(theta_, off_b1(), h(), 1); }
  ConstMap u() const { return block(theta_, off_u(), s(), 3 * h()); }
  ConstMap c() const { return block(theta_, off_c(), s(), 1); }
  ConstMap v() const { return block(theta_, off_v(), v_len(), 1); }
  double b0() const { return theta_[off_b0()]; }

  Map w1(Eigen::VectorXd& g) const { return block(g, 0, h(), kFeatureDim); }
  Map b1(Eigen::VectorXd& g) const { return block(g, off_b1(), h(), 1); }
  Map u(Eigen::VectorXd& g) const { return block(g, off_u(), s(), 3 * h()); }
  Map c(Eigen::VectorXd& g) const { return block(g, off_c(), s(), 1); }
  Map v(Eigen::VectorXd& g) const { return block(g, off_v(), v_len(), 1); }

  struct Forward {
    Eigen::MatrixXd hidden;  // N x hidden
    Eigen::VectorXd graph;   // h_g
    Eigen::MatrixXd score_hidden;  // N x score
    Eigen::VectorXd scores;
  };

  Forward forward(const Observation& obs) const {
    check(obs);
    Forward f;
    const auto n = static_cast<Eigen::Index>(obs.size());
    f.hidden = ((obs.features * w1().transpose()).rowwise() + b1().col(0).transpose()).array().tanh();
    f.graph = f.hidden.colwise().sum().transpose();
    if (linear_score()) {
      const auto w = v().col(0);
      const double shared = w.head(h()).dot(f.graph) + w.segment(h(), h()).dot(f.hidden.row(obs.focus)) + b0();
      f.scores = (f.hidden * w.tail(h())).array() + shared;
      return f;
    }
    const Eigen::VectorXd base = u().leftCols(h()) * f.graph +
                                 u().middleCols(h(), h()) * f.hidden.row(obs.focus).transpose() + c().col(0);
    f.score_hidden = ((f.hidden * u().rightCols(h()).transpose()).rowwise() + base.transpose()).array().tanh();
    f.scores = f.score_hidden * v().col(0) + Eigen::VectorXd::Constant(n, b0());
    return f;
  }

  Eigen::VectorXd scores(const Observation& obs) const { return forward(obs).scores; }

  /// Softmax over the scores of mask-valid nodes. Throws NoValidAction when
  /// every node is masked.
  ActionDistribution distribution(const Observation& obs) const {
    return distribution_from_scores(scores(obs), obs.mask);
  }

  static ActionDistribution distribution_from_scores(const Eigen::VectorXd& scores, const std::vector<char>& mask) {
    ActionDistribution d;
    d.scores = scores;
    d.probs.assign(mask.size(), 0.0);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) top = std::max(top, scores[static_cast<Eigen::Index>(i)]);
    }
    if (top == -std::numeric_limits<double>::infinity()) throw NoValidAction("every node is masked");
    double z = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) z += d.probs[i] = std::exp(scores[static_cast<Eigen::Index>(i)] - top);
    }
    for (double& p : d.probs) p /= z;
    return d;
  }

  double log_prob(const Observation& obs, NodeId action) const {
    const auto d = distribution(obs);
    if (!obs.mask.at(action)) throw InvalidConfig("action is masked");
    return std::log(d.probs[action]);
  }

  /// grad += weight * d log pi(action | obs) / d theta.
  void accumulate_log_prob_gradient(const Observation& obs, NodeId action, double weight,
                                    Eigen::VectorXd& grad) const {
    if (grad.size() != theta_.size()) grad = Eigen::VectorXd::Zero(theta_.size());
    const Forward f = forward(obs);
    const auto d = distribution_from_scores(f.scores, obs.mask);
    const auto n = static_cast<Eigen::Index>(obs.size());

    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (obs.mask[static_cast<std::size_t>(i)]) g[i] = -d.probs[static_cast<std::size_t>(i)];
    }
    g[action] += 1.0;
    g *= weight;

    Eigen::MatrixXd dh;
    if (linear_score()) {
      const double total = g.sum();
      auto gv = v(grad).col(0);
      gv.head(h()) += total * f.graph;
      gv.segment(h(), h()) += total * f.hidden.row(obs.focus).transpose();
      gv.tail(h()) += f.hidden.transpose() * g;
      grad[off_b0()] += total;
      const auto w = v().col(0);
      dh = g * w.tail(h()).transpose();
      dh.rowwise() += total * w.head(h()).transpose();
      dh.row(obs.focus) += total * w.segment(h(), h()).transpose();
    } else {
      dh = score_backward(obs, f, g, grad);
    }
    const Eigen::MatrixXd da = (dh.array() * (1.0 - f.hidden.array().square())).matrix();
    w1(grad) += da.transpose() * obs.features;
    b1(grad).col(0) += da.colwise().sum().transpose();
  }

 private:
  Eigen::MatrixXd score_backward(const Observation& obs, const Forward& f, const Eigen::VectorXd& g,
                                 Eigen::VectorXd& grad) const {
    v(grad).col(0) += f.score_hidden.transpose() * g;
    grad[off_b0()] += g.sum();

    const Eigen::MatrixXd dz =
        ((g * v().col(0).transpose()).array() * (1.0 - f.score_hidden.array().square())).matrix();
    const Eigen::VectorXd dbase = dz.colwise().sum().transpose();
    c(grad).col(0) += dbase;
    u(grad).rightCols(h()) += dz.transpose() * f.hidden;
    u(grad).leftCols(h()) += dbase * f.graph.transpose();
    u(grad).middleCols(h(), h()) += dbase * f.hidden.row(obs.focus);

    Eigen::MatrixXd dh = dz * u().rightCols(h());
    dh.rowwise() += (u().leftCols(h()).transpose() * dbase).transpose();
    dh.row(obs.focus) += (u().middleCols(h(), h()).transpose() * dbase).transpose();
    return dh;
  }

  bool linear_score() const { return arch_.score_width == 0; }
  Eigen::Index v_len() const { return linear_score() ? 3 * h() : s(); }
  Eigen::Index h() const { return arch_.hidden_width; }
  Eigen::Index s() const { return arch_.score_width; }
  Eigen::Index off_b1() const { return h() * kFeatureDim; }
  Eigen::Index off_u() const { return off_b1() + h(); }
  Eigen::Index off_c() const { return off_u() + s() * 3 * h(); }
  Eigen::Index off_v() const { return off_c() + s(); }
  Eigen::Index off_b0() const { return off_v() + v_len(); }

  static ConstMap block(const Eigen::VectorXd& t, Eigen::Index off, Eigen::Index rows, Eigen::Index cols) {
    return ConstMap(t.data() + off, rows, cols);
  }
  static Map block(Eigen::VectorXd& t, Eigen::Index off, Eigen::Index rows, Eigen::Index cols) {
    return Map(t.data() + off, rows, cols);
  }

  static const RankingArchitecture& checked(const RankingArchitecture& a) {
    if (a.hidden_width < 1 || a.score_width < 0) throw InvalidConfig("layer widths must be positive");
    return a;
  }

  void check(const Observation& obs) const {
    if (obs.features.cols() != kFeatureDim || obs.features.rows() != static_cast<Eigen::Index>(obs.mask.size())) {
      throw InvalidConfig("observation features do not match the mask");
    }
    if (obs.focus >= obs.mask.size()) throw UnknownNode("focus node outside the observation");
  }

  RankingArchitecture arch_;
  Eigen::VectorXd theta_;
};

enum class SelectionMode { Train, Eval };

/// Inverts the CDF of the distribution at `draw` in [0, 1), visiting nodes in
/// id order.
inline NodeId sample_action(const ActionDistribution& d, double draw) {
  double cumulative = 0.0;
  std::optional<NodeId> last_valid;
  for (std::size_t i = 0; i < d.probs.size(); ++i) {
    if (d.probs[i] <= 0.0) continue;
    last_valid = static_cast<NodeId>(i);
    cumulative += d.probs[i];
    if (draw < cumulative) return static_cast<NodeId>(i);
  }
  if (!last_valid) throw NoValidAction("empty distribution");
  return *last_valid;
}

/// Highest score among valid nodes, ties to the lowest id.
inline NodeId argmax_action(const ActionDistribution& d, const std::vector<char>& mask) {
  std::optional<NodeId> best;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    if (!best || d.scores[static_cast<Eigen::Index>(i)] > d.scores[*best]) best = static_cast<NodeId>(i);
  }
  if (!best) throw NoValidAction("empty distribution");
  return *best;
}

inline NodeId select_action(const ActionDistribution& d, const std::vector<char>& mask, SelectionMode mode, Rng& rng) {
  if (mode == SelectionMode::Eval) return argmax_action(d, mask);
  return sample_action(d, uniform01(rng));
}

inline nlohmann::json to_json(const RankingPolicy& p) {
  const auto& a = p.architecture();
  auto flat = [](const auto& m) {
    // Row-major flattening for readability outside Eigen.
    std::vector<double> out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    }
    return out;
  };
  nlohmann::json j;
  j["format"] = "coopnet-ranking-policy/1";
  j["architecture"] = {{"hidden_module", "mlp"},
                       {"hidden_width", a.hidden_width},
                       {"hidden_activation", "tanh"},
                       {"score_width", a.score_width},
                       {"score_activation", a.score_width == 0 ? "linear" : "tanh"},
                       {"graph_aggregation", "sum"},
                       {"features", {"strategy", "normalized_degree"}},
                       {"strategy_encoding", {{"D", 0}, {"C", 1}}},
                       {"degree_normalization", "N-1"}};
  j["parameters"] = {{"hidden.weight", flat(p.w1())},  {"hidden.bias", flat(p.b1())},
                     {"score.weight", flat(p.u())},    {"score.bias", flat(p.c())},
                     {"score.output_weight", flat(p.v())}, {"score.output_bias", p.b0()}};
  j["theta"] = std::vector<double>(p.theta().data(), p.theta().data() + p.theta().size());
  return j;
}

inline RankingPolicy ranking_policy_from_json(const nlohmann::json& j) {
  RankingArchitecture a;
  a.hidden_width = j.at("architecture").at("hidden_width").get<int>();
  a.score_width = j.at("architecture").at("score_width").get<int>();
  RankingPolicy p(a);
  const auto theta = j.at("theta").get<std::vector<double>>();
  if (theta.size() != p.parameter_count()) throw ParseError("checkpoint theta has the wrong length");
  p.set_theta(Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size())));
  return p;
}

}  // namespace coopnet::learning
