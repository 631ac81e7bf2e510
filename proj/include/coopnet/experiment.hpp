#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coopnet/competition.hpp"
#include "coopnet/config.hpp"
#include "coopnet/episode.hpp"
#include "coopnet/errors.hpp"
#include "coopnet/game.hpp"
#include "coopnet/learning/ranking_policy.hpp"
#include "coopnet/learning/training.hpp"
#include "coopnet/metrics.hpp"
#include "coopnet/parallel.hpp"
#include "coopnet/policies.hpp"

namespace coopnet {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind { Run, SweepTS, SweepW, SweepW1W2, Compete, Train, Eval };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Run: return "Run";
    case ExperimentKind::SweepTS: return "SweepTS";
    case ExperimentKind::SweepW: return "SweepW";
    case ExperimentKind::SweepW1W2: return "SweepW1W2";
    case ExperimentKind::Compete: return "Compete";
    case ExperimentKind::Train: return "Train";
    case ExperimentKind::Eval: return "Eval";
  }
  return "Run";
}

/// Accepts the canonical names and the CLI subcommand spellings.
inline ExperimentKind experiment_kind_from_name(const std::string& name) {
  static const std::vector<std::pair<std::string, ExperimentKind>> names{
      {"Run", ExperimentKind::Run},         {"run", ExperimentKind::Run},
      {"SweepTS", ExperimentKind::SweepTS}, {"sweep-ts", ExperimentKind::SweepTS},
      {"SweepW", ExperimentKind::SweepW},   {"sweep-w", ExperimentKind::SweepW},
      {"SweepW1W2", ExperimentKind::SweepW1W2}, {"sweep-w1w2", ExperimentKind::SweepW1W2},
      {"Compete", ExperimentKind::Compete}, {"compete", ExperimentKind::Compete},
      {"Train", ExperimentKind::Train},     {"train", ExperimentKind::Train},
      {"Eval", ExperimentKind::Eval},       {"eval", ExperimentKind::Eval},
  };
  for (const auto& [n, k] : names) {
    if (n == name) return k;
  }
  throw InvalidConfig("kind: unknown experiment kind '" + name + "'");
}

/// Everything needed to reproduce one experiment. Replicate r of any cell
/// runs with seed sim.seed + r.
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Run;
  SimConfig sim;
  double T = 2.0;
  double S = -1.0;
  std::size_t replicates = 1;
  std::vector<std::string> policies{"NO_MED"};

  std::vector<double> W_values;
  std::vector<double> W2_values;
  double W2 = 0.0;
  double beta_med = 0.05;
  std::vector<MixEntry> mix;
  std::size_t grid = 21;

  std::string checkpoint;
  RewardKind reward = RewardKind::Cooperation;
  std::size_t updates = 300;
  std::size_t batch_size = 16;
  double learning_rate = 1e-2;
  double baseline_decay = 0.99;
  int hidden_width = 32;
  int score_width = 0;
  learning::StepRule optimizer = learning::StepRule::Adam;

  std::string out = "out";

  bool operator==(const ExperimentSpec& o) const {
    const auto& a = sim;
    const auto& b = o.sim;
    return kind == o.kind && a.N == b.N && a.k == b.k && a.beta == b.beta && a.W == b.W &&
           a.time_limit == b.time_limit && a.seed == b.seed && a.init_coop == b.init_coop && T == o.T && S == o.S &&
           replicates == o.replicates && policies == o.policies && W_values == o.W_values &&
           W2_values == o.W2_values && W2 == o.W2 && beta_med == o.beta_med && mix == o.mix && grid == o.grid &&
           checkpoint == o.checkpoint && reward == o.reward && updates == o.updates && batch_size == o.batch_size &&
           learning_rate == o.learning_rate && baseline_decay == o.baseline_decay &&
           hidden_width == o.hidden_width && score_width == o.score_width && optimizer == o.optimizer &&
           out == o.out;
  }

  GameMatrix game() const { return GameMatrix(T, S); }

  CompetitionConfig competition(double w, double w2) const {
    CompetitionConfig c;
    c.base = sim;
    c.base.W = w;
    c.W2 = w2;
    c.beta_med = beta_med;
    c.initial_mix = mix;
    return c;
  }

  std::vector<std::uint64_t> replicate_seeds() const {
    std::vector<std::uint64_t> s;
    for (std::size_t r = 0; r < replicates; ++r) s.push_back(sim.seed + r);
    return s;
  }
};

namespace detail {

inline nlohmann::json number_or_inf(double v) {
  if (v == kInfinity) return "inf";
  return v;
}

inline double read_number(const nlohmann::json& j, const std::string& path, bool allow_inf = false) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (allow_inf && (s == "inf" || s == "Infinity" || s == "infinity")) return kInfinity;
    throw InvalidConfig(path + ": expected a number, got '" + s + "'");
  }
  if (!j.is_number()) throw InvalidConfig(path + ": expected a number");
  return j.get<double>();
}

inline std::uint64_t read_count(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    throw InvalidConfig(path + ": expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

inline std::string read_string(const nlohmann::json& j, const std::string& path) {
  if (!j.is_string()) throw InvalidConfig(path + ": expected a string");
  return j.get<std::string>();
}

inline std::vector<double> read_numbers(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array()) throw InvalidConfig(path + ": expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_number(j[i], path + "[" + std::to_string(i) + "]", true));
  return out;
}

/// "GOOD:0.5,NO_MED:0.5"
inline std::vector<MixEntry> parse_mix_string(const std::string& text, const std::string& path) {
  std::vector<MixEntry> mix;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.rfind(':');
    if (colon == std::string::npos) throw InvalidMix(path + ": expected NAME:FRACTION, got '" + item + "'");
    MixEntry e;
    e.policy = item.substr(0, colon);
    const std::string frac = item.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(frac.data(), frac.data() + frac.size(), e.fraction);
    if (ec != std::errc{} || ptr != frac.data() + frac.size()) {
      throw InvalidMix(path + ": bad fraction '" + frac + "'");
    }
    mix.push_back(std::move(e));
  }
  return mix;
}

inline std::vector<MixEntry> read_mix(const nlohmann::json& j, const std::string& path) {
  if (j.is_string()) return parse_mix_string(j.get<std::string>(), path);
  if (!j.is_array()) throw InvalidMix(path + ": expected an array or a NAME:FRACTION list");
  std::vector<MixEntry> mix;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = path + "[" + std::to_string(i) + "]";
    const auto& e = j[i];
    if (!e.is_object() || !e.contains("policy") || !e.contains("fraction")) {
      throw InvalidMix(at + ": expected {\"policy\": NAME, \"fraction\": X}");
    }
    for (const auto& [key, _] : e.items()) {
      if (key != "policy" && key != "fraction") throw InvalidConfig(at + "." + key + ": unknown key");
    }
    mix.push_back({read_string(e["policy"], at + ".policy"), read_number(e["fraction"], at + ".fraction")});
  }
  return mix;
}

// Rethrows a validation failure with the offending field prepended.
template <class Fn>
void with_field(const std::string& field, Fn&& fn) {
  try {
    fn();
  } catch (const InvalidMix& e) {
    throw InvalidMix(field + ": " + e.what());
  } catch (const UnknownPolicyName& e) {
    throw UnknownPolicyName(field + ": " + e.what());
  } catch (const ValidationError& e) {
    throw InvalidConfig(field + ": " + e.what());
  }
}

inline learning::StepRule step_rule_from_name(const std::string& s) {
  if (s == "adam") return learning::StepRule::Adam;
  if (s == "sgd") return learning::StepRule::Sgd;
  throw InvalidConfig("optimizer: expected 'adam' or 'sgd', got '" + s + "'");
}

}  // namespace detail

/// Checks cross-field constraints; messages name the offending field.
inline void validate(const ExperimentSpec& spec) {
  using detail::with_field;
  if (spec.replicates < 1) throw InvalidConfig("replicates: must be at least 1");
  const SimConfig& c = spec.sim;
  if (c.N < 2) throw InvalidConfig("N: must be at least 2");
  if (c.k < 2 || c.k >= c.N) throw InvalidConfig("k: must satisfy 2 <= k < N");
  if ((c.N * c.k) % 2 != 0) throw InvalidConfig("k: N*k must be even");
  if (!(c.beta > 0.0) || !std::isfinite(c.beta)) throw InvalidConfig("beta: must be positive and finite");
  if (!(c.W >= 0.0)) throw InvalidConfig("W: must be non-negative");
  if (c.time_limit == 0) throw InvalidConfig("time_limit: must be positive");
  if (!(c.init_coop >= 0.0 && c.init_coop <= 1.0)) throw InvalidConfig("init_coop: must lie in [0, 1]");
  with_field("T/S", [&] { spec.game(); });
  if (!(spec.W2 >= 0.0)) throw InvalidConfig("W2: must be non-negative");
  if (!(spec.beta_med > 0.0) || !std::isfinite(spec.beta_med)) throw InvalidConfig("beta_med: must be positive");
  if (spec.policies.empty()) throw InvalidConfig("policies: at least one policy is required");
  for (std::size_t i = 0; i < spec.policies.size(); ++i) {
    with_field("policies[" + std::to_string(i) + "]", [&] { policy_from_name(spec.policies[i]); });
  }
  for (std::size_t i = 0; i < spec.W_values.size(); ++i) {
    if (!(spec.W_values[i] >= 0.0)) throw InvalidConfig("W_values[" + std::to_string(i) + "]: must be non-negative");
  }
  for (std::size_t i = 0; i < spec.W2_values.size(); ++i) {
    if (!(spec.W2_values[i] >= 0.0)) throw InvalidConfig("W2_values[" + std::to_string(i) + "]: must be non-negative");
  }
  if (!spec.mix.empty()) with_field("mix", [&] { CompetitionConfig::validate_mix(spec.mix); });

  switch (spec.kind) {
    case ExperimentKind::SweepTS:
      if (spec.grid < 1) throw InvalidConfig("grid: must be at least 1");
      break;
    case ExperimentKind::SweepW:
      if (spec.W_values.empty()) throw InvalidConfig("W_values: required for SweepW");
      break;
    case ExperimentKind::SweepW1W2:
      if (spec.W_values.empty()) throw InvalidConfig("W_values: required for SweepW1W2");
      if (spec.W2_values.empty()) throw InvalidConfig("W2_values: required for SweepW1W2");
      [[fallthrough]];
    case ExperimentKind::Compete:
      if (spec.mix.empty()) throw InvalidMix("mix: required for " + to_string(spec.kind));
      break;
    case ExperimentKind::Train:
      if (spec.updates < 1) throw InvalidConfig("updates: must be at least 1");
      if (spec.batch_size < 1) throw InvalidConfig("batch_size: must be at least 1");
      if (!(spec.learning_rate > 0.0)) throw InvalidConfig("learning_rate: must be positive");
      if (!(spec.baseline_decay >= 0.0 && spec.baseline_decay < 1.0)) {
        throw InvalidConfig("baseline_decay: must lie in [0, 1)");
      }
      if (spec.hidden_width < 1) throw InvalidConfig("hidden_width: must be at least 1");
      if (spec.score_width < 0) throw InvalidConfig("score_width: must be non-negative");
      break;
    case ExperimentKind::Eval:
      if (spec.checkpoint.empty()) throw InvalidConfig("checkpoint: required for Eval");
      break;
    case ExperimentKind::Run:
      break;
  }
}

/// Builds a spec from flat JSON keys. k, beta and time_limit default to the
/// environment table row for N when one exists. A manifest written by emit()
/// is accepted as well; its embedded spec is used.
inline ExperimentSpec parse_config(const nlohmann::json& input) {
  using namespace detail;
  if (!input.is_object()) throw ParseError("config: expected a JSON object");
  const nlohmann::json& j = input.contains("format") && input.contains("spec") ? input.at("spec") : input;
  if (!j.is_object()) throw ParseError("spec: expected a JSON object");

  static const std::vector<std::string> known{
      "kind", "N", "k", "beta", "W", "W2", "T", "S", "time_limit", "seed", "replicates", "init_coop", "policy",
      "policies", "W_values", "W2_values", "beta_med", "mix", "grid", "checkpoint", "reward", "updates",
      "batch_size", "learning_rate", "baseline_decay", "hidden_width", "score_width", "optimizer", "out"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw InvalidConfig(key + ": unknown key");
  }

  ExperimentSpec spec;
  if (j.contains("kind")) spec.kind = experiment_kind_from_name(read_string(j["kind"], "kind"));
  if (j.contains("N")) spec.sim.N = read_count(j["N"], "N");
  if (const auto preset = environment_preset(spec.sim.N)) {
    spec.sim.k = preset->k;
    spec.sim.beta = preset->beta;
    spec.sim.time_limit = preset->time_limit;
  } else if (!j.contains("k") || !j.contains("beta") || !j.contains("time_limit")) {
    throw InvalidConfig("N: no environment preset for N=" + std::to_string(spec.sim.N) +
                        "; k, beta and time_limit must be given");
  }
  if (j.contains("k")) spec.sim.k = read_count(j["k"], "k");
  if (j.contains("beta")) spec.sim.beta = read_number(j["beta"], "beta");
  if (j.contains("W")) spec.sim.W = read_number(j["W"], "W", true);
  if (j.contains("time_limit")) spec.sim.time_limit = read_count(j["time_limit"], "time_limit");
  if (j.contains("seed")) spec.sim.seed = read_count(j["seed"], "seed");
  if (j.contains("init_coop")) spec.sim.init_coop = read_number(j["init_coop"], "init_coop");
  if (j.contains("T")) spec.T = read_number(j["T"], "T");
  if (j.contains("S")) spec.S = read_number(j["S"], "S");
  if (j.contains("replicates")) spec.replicates = read_count(j["replicates"], "replicates");
  if (j.contains("policy") && j.contains("policies")) {
    throw InvalidConfig("policy: give either 'policy' or 'policies', not both");
  }
  if (j.contains("policy")) spec.policies = {read_string(j["policy"], "policy")};
  if (j.contains("policies")) {
    if (!j["policies"].is_array()) throw InvalidConfig("policies: expected an array");
    spec.policies.clear();
    for (std::size_t i = 0; i < j["policies"].size(); ++i) {
      spec.policies.push_back(read_string(j["policies"][i], "policies[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("W_values")) spec.W_values = read_numbers(j["W_values"], "W_values");
  if (j.contains("W2_values")) spec.W2_values = read_numbers(j["W2_values"], "W2_values");
  if (j.contains("W2")) spec.W2 = read_number(j["W2"], "W2", true);
  if (j.contains("beta_med")) spec.beta_med = read_number(j["beta_med"], "beta_med");
  if (j.contains("mix")) spec.mix = read_mix(j["mix"], "mix");
  if (j.contains("grid")) spec.grid = read_count(j["grid"], "grid");
  if (j.contains("checkpoint")) spec.checkpoint = read_string(j["checkpoint"], "checkpoint");
  if (j.contains("reward")) {
    with_field("reward", [&] { spec.reward = reward_kind_from_name(read_string(j["reward"], "reward")); });
  }
  if (j.contains("updates")) spec.updates = read_count(j["updates"], "updates");
  if (j.contains("batch_size")) spec.batch_size = read_count(j["batch_size"], "batch_size");
  if (j.contains("learning_rate")) spec.learning_rate = read_number(j["learning_rate"], "learning_rate");
  if (j.contains("baseline_decay")) spec.baseline_decay = read_number(j["baseline_decay"], "baseline_decay");
  if (j.contains("hidden_width")) spec.hidden_width = static_cast<int>(read_count(j["hidden_width"], "hidden_width"));
  if (j.contains("score_width")) spec.score_width = static_cast<int>(read_count(j["score_width"], "score_width"));
  if (j.contains("optimizer")) spec.optimizer = step_rule_from_name(read_string(j["optimizer"], "optimizer"));
  if (j.contains("out")) spec.out = read_string(j["out"], "out");
  validate(spec);
  return spec;
}

inline ExperimentSpec parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return parse_config(j);
}

/// Complete flat JSON form of a spec; parse_config(to_json(s)) == s.
inline nlohmann::json to_json(const ExperimentSpec& s) {
  using detail::number_or_inf;
  nlohmann::json j;
  j["kind"] = to_string(s.kind);
  j["N"] = s.sim.N;
  j["k"] = s.sim.k;
  j["beta"] = s.sim.beta;
  j["W"] = number_or_inf(s.sim.W);
  j["time_limit"] = s.sim.time_limit;
  j["seed"] = s.sim.seed;
  j["init_coop"] = s.sim.init_coop;
  j["T"] = s.T;
  j["S"] = s.S;
  j["replicates"] = s.replicates;
  if (s.policies.size() == 1) {
    j["policy"] = s.policies.front();
  } else {
    j["policies"] = s.policies;
  }
  j["W_values"] = nlohmann::json::array();
  for (double w : s.W_values) j["W_values"].push_back(number_or_inf(w));
  j["W2_values"] = nlohmann::json::array();
  for (double w : s.W2_values) j["W2_values"].push_back(number_or_inf(w));
  j["W2"] = number_or_inf(s.W2);
  j["beta_med"] = s.beta_med;
  j["mix"] = nlohmann::json::array();
  for (const auto& e : s.mix) j["mix"].push_back({{"policy", e.policy}, {"fraction", e.fraction}});
  j["grid"] = s.grid;
  j["checkpoint"] = s.checkpoint;
  j["reward"] = to_string(s.reward);
  j["updates"] = s.updates;
  j["batch_size"] = s.batch_size;
  j["learning_rate"] = s.learning_rate;
  j["baseline_decay"] = s.baseline_decay;
  j["hidden_width"] = s.hidden_width;
  j["score_width"] = s.score_width;
  j["optimizer"] = s.optimizer == learning::StepRule::Adam ? "adam" : "sgd";
  j["out"] = s.out;
  return j;
}

// ---------------------------------------------------------------------------
// Results

/// One CSV row: an episode plus the identifiers of the cell it belongs to.
struct RunRecord {
  std::string kind;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::string policy;
  SimConfig config;
  double W2 = 0.0;
  double T = 2.0;
  double S = -1.0;
  EpisodeResult result;
};

struct ExperimentOutput {
  std::vector<RunRecord> records;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> warnings;
  std::optional<nlohmann::json> checkpoint;
  std::vector<learning::UpdateDiagnostics> training_log;
};

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "kind",          "replicate",       "seed",           "policy",           "N",
      "k",             "beta",            "W",              "W2",               "T",
      "S",             "coop_fraction",   "rewire_requests", "rewires_executed", "rewire_opportunities",
      "heterogeneity", "max_degree",      "stop_time",      "mediator_shares"};
  return cols;
}

/// Shortest decimal text that reads back to the same double; "inf" for W = inf.
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string csv_row(const RunRecord& r) {
  std::string shares;
  if (r.result.per_mediator) {
    for (const auto& m : *r.result.per_mediator) {
      if (!shares.empty()) shares += ';';
      shares += m.name + ":" + format_number(m.share);
    }
  }
  const auto& c = r.result.counters;
  std::ostringstream os;
  os << r.kind << ',' << r.replicate << ',' << r.seed << ',' << r.policy << ',' << r.config.N << ',' << r.config.k
     << ',' << format_number(r.config.beta) << ',' << format_number(r.config.W) << ',' << format_number(r.W2) << ','
     << format_number(r.T) << ',' << format_number(r.S) << ',' << format_number(r.result.coop_fraction) << ','
     << c.rewire_requests << ',' << c.rewires_executed << ',' << c.rewire_opportunities << ','
     << format_number(r.result.heterogeneity) << ',' << r.result.max_degree << ',' << r.result.stop_time << ','
     << shares;
  return os.str();
}

inline std::string to_csv(const std::vector<RunRecord>& records) {
  std::string out;
  for (std::size_t i = 0; i < csv_columns().size(); ++i) {
    if (i) out += ',';
    out += csv_columns()[i];
  }
  out += '\n';
  for (const auto& r : records) out += csv_row(r) + '\n';
  return out;
}

namespace detail {

inline std::vector<EpisodeResult> results_of(const std::vector<RunRecord>& records, std::size_t begin,
                                             std::size_t count) {
  std::vector<EpisodeResult> out;
  for (std::size_t i = begin; i < begin + count; ++i) out.push_back(records[i].result);
  return out;
}

inline std::vector<double> grid_axis(double lo, double hi, std::size_t n) {
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  return v;
}

inline std::string mix_label(const std::vector<MixEntry>& mix) {
  std::string s;
  for (const auto& e : mix) s += (s.empty() ? "" : "+") + e.policy;
  return s;
}

struct Cell {
  std::string policy;
  SimConfig config;
  double T, S, W2;
};

// Every (cell, replicate) pair runs as one task; records land in cell-major,
// replicate-minor order whatever the completion order.
inline std::vector<RunRecord> run_cells(const ExperimentSpec& spec, const std::vector<Cell>& cells, std::size_t jobs) {
  std::vector<RunRecord> records(cells.size() * spec.replicates);
  std::vector<RewirePolicy> policies;
  for (const auto& c : cells) policies.push_back(policy_from_name(c.policy));
  parallel_for(records.size(), jobs, [&](std::size_t t) {
    const std::size_t cell = t / spec.replicates, r = t % spec.replicates;
    const Cell& c = cells[cell];
    RunRecord rec{to_string(spec.kind), r, spec.sim.seed + r, c.policy, c.config, c.W2, c.T, c.S, {}};
    rec.config.seed = rec.seed;
    rec.result = run_episode(rec.config, GameMatrix(c.T, c.S), policies[cell]);
    records[t] = std::move(rec);
  });
  return records;
}

inline nlohmann::json cell_summary(const Cell& c, const std::vector<EpisodeResult>& results) {
  const auto agg = aggregate(results);
  return {{"policy", c.policy},
          {"W", number_or_inf(c.config.W)},
          {"T", c.T},
          {"S", c.S},
          {"mean_coop_fraction", agg.at("coop_fraction").mean},
          {"mean_stop_time", agg.at("stop_time").mean},
          {"aggregate", to_json(agg)}};
}

}  // namespace detail

/// Independent replicates of every listed policy under one configuration.
inline ExperimentOutput run_replicates(const ExperimentSpec& spec, std::size_t jobs = 1) {
  std::vector<detail::Cell> cells;
  for (const auto& p : spec.policies) cells.push_back({p, spec.sim, spec.T, spec.S, 0.0});
  ExperimentOutput out;
  out.records = detail::run_cells(spec, cells, jobs);
  out.summary["cells"] = nlohmann::json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto cell = detail::cell_summary(cells[i], detail::results_of(out.records, i * spec.replicates, spec.replicates));
    std::vector<double> coop, engage;
    for (std::size_t r = 0; r < spec.replicates; ++r) {
      const auto& res = out.records[i * spec.replicates + r].result;
      coop.push_back(reward(RewardKind::Cooperation, res));
      engage.push_back(reward(RewardKind::Engagement, res));
    }
    cell["mean_reward"] = {{"cooperation", describe(coop).mean}, {"engagement", describe(engage).mean}};
    out.summary["cells"].push_back(cell);
  }
  return out;
}

/// (T, S) phase diagram: T over [0, 2] and S over [-1, 1] with `grid` points
/// each, T-major. A 1x1 grid is the single cell at the spec's own (T, S).
inline ExperimentOutput sweep_ts(const ExperimentSpec& spec, std::size_t jobs = 1) {
  const std::vector<double> ts = spec.grid == 1 ? std::vector<double>{spec.T} : detail::grid_axis(0.0, 2.0, spec.grid);
  const std::vector<double> ss = spec.grid == 1 ? std::vector<double>{spec.S} : detail::grid_axis(-1.0, 1.0, spec.grid);
  std::vector<detail::Cell> cells;
  for (double t : ts) {
    for (double s : ss) cells.push_back({spec.policies.front(), spec.sim, t, s, 0.0});
  }
  ExperimentOutput out;
  out.records = detail::run_cells(spec, cells, jobs);
  out.summary["T_values"] = ts;
  out.summary["S_values"] = ss;
  out.summary["cells"] = nlohmann::json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out.summary["cells"].push_back(
        detail::cell_summary(cells[i], detail::results_of(out.records, i * spec.replicates, spec.replicates)));
  }
  return out;
}

/// Every policy at every W value.
inline ExperimentOutput sweep_w(const ExperimentSpec& spec, std::size_t jobs = 1) {
  std::vector<detail::Cell> cells;
  for (const auto& p : spec.policies) {
    for (double w : spec.W_values) {
      SimConfig c = spec.sim;
      c.W = w;
      cells.push_back({p, c, spec.T, spec.S, 0.0});
    }
  }
  ExperimentOutput out;
  out.records = detail::run_cells(spec, cells, jobs);
  out.summary["cells"] = nlohmann::json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out.summary["cells"].push_back(
        detail::cell_summary(cells[i], detail::results_of(out.records, i * spec.replicates, spec.replicates)));
  }
  return out;
}

namespace detail {

inline std::vector<RunRecord> run_competition_cells(const ExperimentSpec& spec,
                                                    const std::vector<std::pair<double, double>>& cells,
                                                    std::size_t jobs) {
  std::vector<RunRecord> records(cells.size() * spec.replicates);
  const GameMatrix game = spec.game();
  parallel_for(records.size(), jobs, [&](std::size_t t) {
    const std::size_t cell = t / spec.replicates, r = t % spec.replicates;
    CompetitionConfig c = spec.competition(cells[cell].first, cells[cell].second);
    c.base.seed = spec.sim.seed + r;
    RunRecord rec{to_string(spec.kind), r, c.base.seed, mix_label(spec.mix), c.base, c.W2, spec.T, spec.S, {}};
    rec.result = run_competition_episode(c, game).result;
    records[t] = std::move(rec);
  });
  return records;
}

}  // namespace detail

/// Mean final mediator shares for every (W, W2) pair, W-major.
inline ExperimentOutput sweep_w1w2(const ExperimentSpec& spec, std::size_t jobs = 1) {
  std::vector<std::pair<double, double>> cells;
  for (double w : spec.W_values) {
    for (double w2 : spec.W2_values) cells.emplace_back(w, w2);
  }
  ExperimentOutput out;
  out.records = detail::run_competition_cells(spec, cells, jobs);
  nlohmann::json mediators = nlohmann::json::array();
  for (const auto& e : spec.mix) mediators.push_back(e.policy);
  out.summary["mediators"] = mediators;
  out.summary["cells"] = nlohmann::json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::vector<std::vector<double>> shares(spec.mix.size());
    std::vector<double> coop;
    for (std::size_t r = 0; r < spec.replicates; ++r) {
      const auto& res = out.records[i * spec.replicates + r].result;
      for (std::size_t m = 0; m < spec.mix.size(); ++m) shares[m].push_back(res.per_mediator->at(m).share);
      coop.push_back(res.coop_fraction);
    }
    std::vector<double> means;
    for (auto& s : shares) means.push_back(describe(s).mean);
    out.summary["cells"].push_back({{"W", detail::number_or_inf(cells[i].first)},
                                    {"W2", detail::number_or_inf(cells[i].second)},
                                    {"mean_shares", means},
                                    {"mean_coop_fraction", describe(coop).mean}});
  }
  return out;
}

/// One adoption scenario at the spec's W and W2.
inline ExperimentOutput compete(const ExperimentSpec& spec, std::size_t jobs = 1) {
  ExperimentOutput out;
  out.records = detail::run_competition_cells(spec, {{spec.sim.W, spec.W2}}, jobs);
  AdoptionSummary s;
  for (const auto& e : spec.mix) s.mediators.push_back(e.policy);
  Rng assign_rng(derive_seed(spec.sim.seed, 1));
  s.initial_shares = assign_initial_mediators(spec.sim.N, spec.mix, assign_rng).shares();
  s.starting_majority = static_cast<std::size_t>(
      std::distance(s.initial_shares.begin(), std::ranges::max_element(s.initial_shares)));
  s.final_shares.assign(s.mediators.size(), {});
  std::vector<double> coop, requests, majority;
  for (const auto& rec : out.records) {
    for (std::size_t m = 0; m < s.mediators.size(); ++m) s.final_shares[m].push_back(rec.result.per_mediator->at(m).share);
    coop.push_back(rec.result.coop_fraction);
    requests.push_back(static_cast<double>(rec.result.counters.rewire_requests));
    majority.push_back(rec.result.per_mediator->at(s.starting_majority).share);
    s.runs.push_back(rec.result);
  }
  s.mean_coop_fraction = describe(coop).mean;
  s.mean_rewire_requests = describe(requests).mean;
  s.final_prop_start_majority = describe(majority).mean;
  out.summary = to_json(s);
  return out;
}

namespace detail {

inline ExperimentOutput evaluation_output(const ExperimentSpec& spec,
                                          const std::shared_ptr<const learning::RankingPolicy>& policy,
                                          std::size_t jobs) {
  ExperimentOutput out;
  const auto e = learning::evaluate_policy(policy, spec.sim, spec.game(), spec.reward, spec.replicates, jobs);
  for (std::size_t r = 0; r < spec.replicates; ++r) {
    SimConfig c = spec.sim;
    c.seed = spec.sim.seed + r;
    out.records.push_back({to_string(spec.kind), r, c.seed, "LEARNED", c, 0.0, spec.T, spec.S, e.results[r]});
  }
  out.summary["evaluation"] = {{"reward", to_string(spec.reward)},
                               {"episodes", spec.replicates},
                               {"mean_reward", e.mean_reward},
                               {"aggregate", to_json(e.summary)}};
  return out;
}

}  // namespace detail

/// Trains a ranking policy, then evaluates it (argmax mode) on the
/// replicate seeds.
inline ExperimentOutput train_experiment(const ExperimentSpec& spec, std::size_t jobs = 1,
                                         const std::function<void(const learning::UpdateDiagnostics&)>& on_update = {}) {
  learning::TrainOptions opt;
  opt.updates = spec.updates;
  opt.batch_size = spec.batch_size;
  opt.learning_rate = spec.learning_rate;
  opt.baseline_decay = spec.baseline_decay;
  opt.rule = spec.optimizer;
  opt.architecture = {spec.hidden_width, spec.score_width};
  opt.jobs = jobs;
  auto run = learning::train(spec.sim, spec.game(), spec.reward, opt, on_update);
  auto policy = std::make_shared<const learning::RankingPolicy>(run.policy);
  ExperimentOutput out = detail::evaluation_output(spec, policy, jobs);
  out.checkpoint = learning::to_json(run.policy);
  out.training_log = std::move(run.log);
  if (!out.training_log.empty()) {
    const auto& last = out.training_log.back();
    out.summary["training"] = {{"updates", out.training_log.size()},
                               {"final_mean_reward", last.mean_reward},
                               {"final_mean_raw_reward", last.mean_raw_reward},
                               {"final_mean_action_strategy", last.mean_action_strategy},
                               {"final_mean_action_degree", last.mean_action_degree}};
  }
  return out;
}

inline learning::RankingPolicy load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path);
  try {
    return learning::ranking_policy_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint: " + std::string(e.what()));
  }
}

inline ExperimentOutput eval_experiment(const ExperimentSpec& spec, std::size_t jobs = 1) {
  auto policy = std::make_shared<const learning::RankingPolicy>(load_checkpoint(spec.checkpoint));
  return detail::evaluation_output(spec, policy, jobs);
}

inline ExperimentOutput run_experiment(const ExperimentSpec& spec, std::size_t jobs = 1) {
  validate(spec);
  switch (spec.kind) {
    case ExperimentKind::Run: return run_replicates(spec, jobs);
    case ExperimentKind::SweepTS: return sweep_ts(spec, jobs);
    case ExperimentKind::SweepW: return sweep_w(spec, jobs);
    case ExperimentKind::SweepW1W2: return sweep_w1w2(spec, jobs);
    case ExperimentKind::Compete: return compete(spec, jobs);
    case ExperimentKind::Train: return train_experiment(spec, jobs);
    case ExperimentKind::Eval: return eval_experiment(spec, jobs);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Emission

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f.flush()) throw IoError("failed writing " + path.string());
}

inline std::string training_log_csv(const std::vector<learning::UpdateDiagnostics>& log) {
  std::string out =
      "update,mean_reward,mean_raw_reward,mean_action_strategy,mean_action_degree,baseline,reward_sd,grad_norm,"
      "decisions\n";
  for (const auto& d : log) {
    out += std::to_string(d.update) + ',' + format_number(d.mean_reward) + ',' + format_number(d.mean_raw_reward) +
           ',' + format_number(d.mean_action_strategy) + ',' + format_number(d.mean_action_degree) + ',' +
           format_number(d.baseline) + ',' + format_number(d.reward_sd) + ',' + format_number(d.grad_norm) + ',' +
           std::to_string(d.decisions) + '\n';
  }
  return out;
}

}  // namespace detail

/// Writes results.csv, summary.json and manifest.json into `dir` (plus
/// checkpoint.json and training_log.csv after training). Returns the
/// manifest.
inline nlohmann::json emit(const ExperimentSpec& spec, const ExperimentOutput& output,
                           const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<std::string> warnings = output.warnings;
  if (output.records.empty()) warnings.push_back("empty result set: results.csv holds only the header");

  std::vector<std::string> files{"results.csv", "summary.json", "manifest.json"};
  detail::write_file(dir / "results.csv", to_csv(output.records));
  detail::write_file(dir / "summary.json", output.summary.dump(2) + "\n");
  if (output.checkpoint) {
    detail::write_file(dir / "checkpoint.json", output.checkpoint->dump(2) + "\n");
    files.push_back("checkpoint.json");
  }
  if (!output.training_log.empty()) {
    detail::write_file(dir / "training_log.csv", detail::training_log_csv(output.training_log));
    files.push_back("training_log.csv");
  }

  nlohmann::json manifest;
  manifest["format"] = "coopnet-manifest/1";
  manifest["version"] = kVersion;
  manifest["spec"] = to_json(spec);
  manifest["seeds"] = spec.replicate_seeds();
  manifest["seed_rule"] = "replicate r runs with seed + r";
  manifest["files"] = files;
  manifest["warnings"] = warnings;
  detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace coopnet
