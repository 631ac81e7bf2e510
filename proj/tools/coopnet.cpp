#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coopnet/errors.hpp"
#include "coopnet/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed, replicates, N, k;
  std::optional<double> beta, T, S;
  std::optional<std::string> W, W2, policy, mix, out, checkpoint, reward;
  std::size_t jobs = 1;
};

void add_options(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config, "JSON config or a manifest.json from an earlier run");
  cmd.add_option("--seed", o.seed, "base seed; replicate r uses seed + r");
  cmd.add_option("--replicates", o.replicates, "episodes per cell");
  cmd.add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd.add_option("--out", o.out, "output directory");
  cmd.add_option("--N", o.N, "node count");
  cmd.add_option("--k", o.k, "average degree");
  cmd.add_option("--beta", o.beta, "Fermi temperature");
  cmd.add_option("--W", o.W, "structural/strategy timescale ratio (number or inf)");
  cmd.add_option("--W2", o.W2, "mediator timescale ratio (number or inf)");
  cmd.add_option("--T", o.T, "temptation");
  cmd.add_option("--S", o.S, "sucker's payoff");
  cmd.add_option("--policy", o.policy, "recommender policy name");
  cmd.add_option("--mix", o.mix, "initial mediator mix, NAME:FRACTION,...");
  cmd.add_option("--checkpoint", o.checkpoint, "trained policy checkpoint (eval)");
  cmd.add_option("--reward", o.reward, "cooperation or engagement (train, eval)");
}

nlohmann::json number_or_inf_text(const std::string& text) {
  if (text == "inf") return "inf";
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw coopnet::InvalidConfig("expected a number or 'inf', got '" + text + "'");
}

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw coopnet::IoError("cannot read config " + path);
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.is_object() && j.contains("format") && j.contains("spec")) return j.at("spec");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw coopnet::ParseError("config: " + std::string(e.what()));
  }
}

// Flags win over the file.
coopnet::ExperimentSpec build_spec(const std::string& kind, const Overrides& o) {
  nlohmann::json j = load_config(o.config);
  if (!j.is_object()) throw coopnet::ParseError("config: expected a JSON object");
  j["kind"] = kind;
  if (o.seed) j["seed"] = *o.seed;
  if (o.replicates) j["replicates"] = *o.replicates;
  if (o.N) j["N"] = *o.N;
  if (o.k) j["k"] = *o.k;
  if (o.beta) j["beta"] = *o.beta;
  if (o.T) j["T"] = *o.T;
  if (o.S) j["S"] = *o.S;
  if (o.W) {
    try {
      j["W"] = number_or_inf_text(*o.W);
    } catch (const coopnet::InvalidConfig& e) {
      throw coopnet::InvalidConfig(std::string("W: ") + e.what());
    }
  }
  if (o.W2) {
    try {
      j["W2"] = number_or_inf_text(*o.W2);
    } catch (const coopnet::InvalidConfig& e) {
      throw coopnet::InvalidConfig(std::string("W2: ") + e.what());
    }
  }
  if (o.policy) {
    j.erase("policies");
    j["policy"] = *o.policy;
  }
  if (o.mix) j["mix"] = *o.mix;
  if (o.out) j["out"] = *o.out;
  if (o.checkpoint) j["checkpoint"] = *o.checkpoint;
  if (o.reward) j["reward"] = *o.reward;
  return coopnet::parse_config(j);
}

int execute(const std::string& kind, const Overrides& o) {
  const coopnet::ExperimentSpec spec = build_spec(kind, o);
  std::cerr << "coopnet " << coopnet::kVersion << ": " << coopnet::to_string(spec.kind) << " N=" << spec.sim.N
            << " replicates=" << spec.replicates << " seed=" << spec.sim.seed << " -> " << spec.out << "\n";
  coopnet::ExperimentOutput output;
  if (spec.kind == coopnet::ExperimentKind::Train) {
    output = coopnet::train_experiment(spec, o.jobs, [&](const coopnet::learning::UpdateDiagnostics& d) {
      if (d.update % 25 == 0 || d.update + 1 == spec.updates) {
        std::cerr << "update " << d.update << " reward " << d.mean_raw_reward << " action_strategy "
                  << d.mean_action_strategy << "\n";
      }
    });
  } else {
    output = coopnet::run_experiment(spec, o.jobs);
  }
  const auto manifest = coopnet::emit(spec, output, spec.out);
  for (const auto& w : manifest["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
  std::cout << output.summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperation under recommender-mediated network rewiring"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(coopnet::kVersion));

  const std::vector<std::pair<std::string, std::string>> commands{
      {"run", "replicate episodes for one configuration"},
      {"sweep-ts", "phase diagram over the (T, S) game plane"},
      {"sweep-w", "policies across timescale ratios W"},
      {"sweep-w1w2", "mediator competition across W and W2"},
      {"compete", "one mediator adoption scenario"},
      {"train", "train a ranking policy"},
      {"eval", "evaluate a trained checkpoint"},
  };
  Overrides overrides;
  std::string chosen;
  for (const auto& [name, help] : commands) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_options(*cmd, overrides);
    cmd->callback([&chosen, n = name] { chosen = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return execute(chosen, overrides);
  } catch (const coopnet::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
