// Acceptance suite: one PASS/FAIL line per criterion, detail lines indented.
// Usage: acceptance [criterion ...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "coopnet/experiment.hpp"

namespace {

using namespace coopnet;
namespace fs = std::filesystem;

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { details.push_back("     " + what); }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

struct Sample {
  double mean = 0.0, half_width = 0.0;  // 95% normal interval
  double lo() const { return mean - half_width; }
  double hi() const { return mean + half_width; }
};

Sample sample(const std::vector<double>& v) {
  const auto d = describe(v);
  return {d.mean, 1.96 * d.sd / std::sqrt(static_cast<double>(v.size()))};
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(2);
  os << std::scientific << v;
  return os.str();
}

std::string show(const Sample& s) { return fmt(s.mean) + " [" + fmt(s.lo()) + ", " + fmt(s.hi()) + "]"; }

// a >= b, either with non-overlapping 95% intervals or a mean margin of 0.05.
bool ordered(const Sample& a, const Sample& b) { return a.lo() > b.hi() || a.mean - b.mean >= 0.05; }

// ---------------------------------------------------------------------------

Outcome mechanics() {
  Outcome o;
  bool exact = true;
  for (double beta : {1e-4, 0.005, 0.1, 1.0, 50.0}) exact = exact && fermi(0.0, beta) == 0.5;
  o.check(exact, "fermi(0, beta) == 0.5 exactly for five temperatures");

  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> diff(-1e3, 1e3), temp(1e-3, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double d = diff(gen), b = temp(gen);
    worst = std::max(worst, std::abs(fermi(d, b) + fermi(-d, b) - 1.0));
  }
  o.check(worst < 1e-12, "max |fermi(d) + fermi(-d) - 1| over 1e5 draws = " + sci(worst));

  std::uniform_real_distribution<double> tt(0.0, 2.0), ss(-1.0, 1.0), pp(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::size_t mismatches = 0, graphs = 0;
  for (; graphs < 1000; ++graphs) {
    const std::size_t n = 1 + graphs % 12;
    const double p = pp(gen);
    std::vector<Edge> edges;
    std::vector<std::vector<int>> adj(n, std::vector<int>(n, 0));
    for (NodeId a = 0; a < n; ++a) {
      for (NodeId b = a + 1; b < n; ++b) {
        if (std::bernoulli_distribution(p)(gen)) {
          edges.emplace_back(a, b);
          adj[a][b] = adj[b][a] = 1;
        }
      }
    }
    std::vector<Strategy> strat(n);
    for (auto& s : strat) s = coin(gen) ? Strategy::Cooperate : Strategy::Defect;
    const auto state = NetworkState::from_edges(n, edges, strat);
    const GameMatrix g(tt(gen), ss(gen));
    const double table[2][2] = {{0.0, g.temptation()}, {g.sucker(), 1.0}};  // [self C?][other C?]
    for (NodeId x = 0; x < n; ++x) {
      double brute = 0.0;
      for (NodeId y = 0; y < n; ++y) {
        if (adj[x][y]) brute += table[strat[x] == Strategy::Cooperate][strat[y] == Strategy::Cooperate];
      }
      if (std::abs(brute - cumulative_payoff(state, g, x)) > 1e-12) ++mismatches;
    }
  }
  o.check(mismatches == 0, "payoff vs brute-force neighbor sum on " + std::to_string(graphs) +
                               " random graphs (N <= 12): " + std::to_string(mismatches) + " mismatches");
  return o;
}

Outcome phase_diagram() {
  Outcome o;
  ExperimentSpec spec;
  spec.kind = ExperimentKind::SweepTS;
  spec.sim.N = 100;
  spec.sim.k = 4;
  spec.sim.beta = 0.1;
  spec.sim.time_limit = 10000;
  spec.sim.W = 0.0;
  spec.replicates = 10;
  spec.grid = 21;
  spec.policies = {"NO_MED"};
  const auto out = sweep_ts(spec, jobs());

  std::vector<double> quadrant;
  double quadrant_min = 1.0, corner = -1.0;
  for (const auto& cell : out.summary["cells"]) {
    const double t = cell["T"], s = cell["S"], coop = cell["mean_coop_fraction"];
    if (s >= -1e-12 && t <= 1.0 + 1e-12) {
      quadrant.push_back(coop);
      quadrant_min = std::min(quadrant_min, coop);
    }
    if (std::abs(t - 2.0) < 1e-12 && std::abs(s + 1.0) < 1e-12) corner = coop;
  }
  const double qmean = describe(quadrant).mean;
  o.note("N=100, k=4, beta=0.1, W=0, time limit 10000, 21x21 grid, 10 replicates per cell");
  o.check(qmean >= 0.9, "upper-left quadrant (S >= 0, T <= 1) mean coop_fraction " + fmt(qmean) + " >= 0.9 over " +
                            std::to_string(quadrant.size()) + " cells");
  o.note("lowest single quadrant cell " + fmt(quadrant_min));
  o.check(corner >= 0.0 && corner <= 0.05, "PD corner (T=2, S=-1) mean coop_fraction " + fmt(corner) + " <= 0.05");
  return o;
}

struct HeuristicRuns {
  std::map<std::string, std::vector<EpisodeResult>> by_policy;
};

const HeuristicRuns& heuristic_runs() {
  static const HeuristicRuns runs = [] {
    ExperimentSpec spec;
    spec.sim = preset_config(500, 1.0, 0);
    spec.replicates = 30;
    spec.policies = {"GOOD", "RANDOM", "FAIR", "BAD", "NO_MED"};
    const auto out = run_replicates(spec, jobs());
    HeuristicRuns r;
    for (const auto& rec : out.records) r.by_policy[rec.policy].push_back(rec.result);
    return r;
  }();
  return runs;
}

Sample metric(const std::string& policy, const std::function<double(const EpisodeResult&)>& f) {
  std::vector<double> v;
  for (const auto& r : heuristic_runs().by_policy.at(policy)) v.push_back(f(r));
  return sample(v);
}

Outcome heuristic_ordering() {
  Outcome o;
  o.note("N=500 preset (k=30, beta=0.005, time limit 30000), PD, W=1, 30 replicates, seeds 0..29");
  const auto coop = [](const EpisodeResult& r) { return r.coop_fraction; };
  const auto rate = [](const EpisodeResult& r) { return rewires_per_opportunity(r.counters); };
  std::map<std::string, Sample> c, q;
  for (const char* p : {"GOOD", "RANDOM", "FAIR", "BAD"}) {
    c[p] = metric(p, coop);
    q[p] = metric(p, rate);
    o.note(std::string(p) + ": coop " + show(c[p]) + ", rewires/opportunity " + show(q[p]));
  }
  o.check(ordered(c["GOOD"], c["RANDOM"]), "coop GOOD >= RANDOM");
  o.check(ordered(c["RANDOM"], c["FAIR"]), "coop RANDOM >= FAIR");
  for (const char* p : {"GOOD", "RANDOM", "FAIR"}) o.check(ordered(c[p], c["BAD"]), std::string("coop BAD below ") + p);
  for (const char* p : {"GOOD", "RANDOM", "FAIR"}) {
    o.check(ordered(q["BAD"], q[p]), std::string("rewires/opportunity BAD above ") + p);
  }
  for (const char* p : {"RANDOM", "FAIR", "BAD"}) {
    o.check(ordered(q[p], q["GOOD"]), std::string("rewires/opportunity GOOD below ") + p);
  }
  o.note("pairwise test: non-overlapping 95% intervals or mean margin >= 0.05");
  return o;
}

Outcome topology() {
  Outcome o;
  const auto het = [](const EpisodeResult& r) { return r.heterogeneity; };
  const double local = metric("NO_MED", het).mean;
  o.note("NO_MED mean heterogeneity " + fmt(local, 2));
  for (const char* p : {"GOOD", "RANDOM", "FAIR", "BAD"}) {
    const double m = metric(p, het).mean;
    o.check(local > m, std::string("NO_MED > ") + p + " (" + fmt(m, 2) + ")");
  }
  return o;
}

Outcome competition_table() {
  Outcome o;
  CompetitionConfig base;
  base.base.N = 1000;
  base.base.k = 30;
  base.base.beta = 0.005;
  base.base.time_limit = 100000;
  base.base.W = 1.0;
  base.base.seed = 0;
  base.W2 = 0.1;
  base.beta_med = 0.05;
  o.note("N=1000, k=30, beta=0.005, time limit 1e5, W=1, W2=0.1, beta_med=0.05, 30 runs");
  const auto game = GameMatrix::prisoners_dilemma();
  const auto run = [&](std::vector<MixEntry> mix) {
    CompetitionConfig c = base;
    c.initial_mix = std::move(mix);
    return run_adoption_experiment(c, game, 30, jobs());
  };

  const auto aligned = run({{"ALIGNED", 1.0}});
  const auto engagement = run({{"ENGAGEMENT", 1.0}});
  const auto local = run({{"NO_MED", 1.0}});
  o.check(std::abs(aligned.mean_coop_fraction - 0.52) <= 0.15,
          "(a) aligned monopoly coops " + fmt(aligned.mean_coop_fraction) + " within 0.52 +- 0.15");
  o.check(engagement.mean_coop_fraction <= 0.15,
          "(a) engagement monopoly coops " + fmt(engagement.mean_coop_fraction) + " <= 0.15");
  o.check(local.mean_coop_fraction <= 0.05, "(a) local monopoly coops " + fmt(local.mean_coop_fraction) + " <= 0.05");

  const auto eng_local = run({{"NO_MED", 0.9}, {"ENGAGEMENT", 0.1}});
  o.check(eng_local.final_prop_start_majority >= 0.75,
          "(b) engagement vs local majority: local keeps " + fmt(eng_local.final_prop_start_majority) + " >= 0.75");
  const auto al_local = run({{"NO_MED", 0.9}, {"ALIGNED", 0.1}});
  const double aligned_share = al_local.mean_final_shares()[1];
  o.check(aligned_share >= 0.45, "(c) aligned vs local majority: aligned reaches " + fmt(aligned_share) + " >= 0.45");
  const auto al_eng = run({{"ENGAGEMENT", 0.9}, {"ALIGNED", 0.1}});
  o.check(al_eng.final_prop_start_majority <= 0.55,
          "(d) aligned vs engagement majority: engagement keeps " + fmt(al_eng.final_prop_start_majority) +
              " <= 0.55");
  o.note("monopoly rewire requests: aligned " + fmt(aligned.mean_rewire_requests, 1) + ", engagement " +
         fmt(engagement.mean_rewire_requests, 1) + ", local " + fmt(local.mean_rewire_requests, 1));
  return o;
}

double gradient_check(std::uint64_t seed, learning::RankingArchitecture arch) {
  using namespace learning;
  auto policy = RankingPolicy::random(arch, seed, 0.5);
  SimConfig c;
  c.N = 4 + seed % 5;  // 4..8
  c.k = 2;
  c.beta = 0.3;
  c.W = 3.0;
  c.time_limit = 50;
  auto frozen = std::make_shared<const RankingPolicy>(policy);
  std::vector<Trajectory> batch;
  for (std::uint64_t i = 0; i < 4; ++i) {
    c.seed = derive_seed(seed, i);
    c.init_coop = 0.3 + 0.1 * static_cast<double>(i);
    batch.push_back(rollout(c, GameMatrix::prisoners_dilemma(), frozen, RewardKind::Cooperation));
    batch.back().reward = 0.25 * static_cast<double>(i) - 0.4;
  }
  const Eigen::VectorXd analytic = batch_gradient(policy, batch, 0.0);
  Eigen::VectorXd theta = policy.theta();
  double worst = 0.0;
  const double eps = 1e-5;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + eps;
    policy.set_theta(theta);
    const double up = batch_objective(policy, batch, 0.0);
    theta[i] = keep - eps;
    policy.set_theta(theta);
    const double down = batch_objective(policy, batch, 0.0);
    theta[i] = keep;
    policy.set_theta(theta);
    const double numeric = (up - down) / (2 * eps);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-3});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
  }
  return worst;
}

Outcome learning_criteria() {
  using namespace learning;
  Outcome o;
  const auto game = GameMatrix::prisoners_dilemma();

  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    worst = std::max(worst, gradient_check(seed, {8, 0}));
    worst = std::max(worst, gradient_check(seed, {6, 4}));
  }
  o.check(worst < 1e-4, "(a) policy gradient vs central differences, worst relative error " + sci(worst) +
                            " (20 random theta, N 4..8)");

  {
    RankingPolicy p = RankingPolicy::random({}, derive_seed(1, 7));
    OptimizerState opt;
    SimConfig c;
    std::deque<double> window;
    int reached = -1;
    for (int u = 0; u < 500 && reached < 0; ++u) {
      std::vector<Trajectory> batch;
      for (int i = 0; i < 16; ++i) {
        c.seed = derive_seed(1, 1000 + static_cast<std::uint64_t>(u * 16 + i));
        batch.push_back(bandit_rollout(p, c, SelectionMode::Train));
      }
      window.push_back(policy_gradient_update(p, batch, opt).mean_action_strategy);
      if (window.size() > 20) window.pop_front();
      if (window.size() == 20 && std::accumulate(window.begin(), window.end(), 0.0) / 20.0 >= 0.95) reached = u;
    }
    o.check(reached >= 0, "(b) bandit: 20-update mean action strategy >= 0.95 " +
                              (reached >= 0 ? "at update " + std::to_string(reached) : std::string("not reached")));
  }

  const SimConfig eval = preset_config(10, 1.0, 5000000);
  const auto trained = [&](RewardKind kind, std::size_t updates) {
    TrainOptions opt;
    opt.updates = updates;
    opt.batch_size = 16;
    opt.jobs = jobs();
    return std::make_shared<const RankingPolicy>(train(preset_config(10, 1.0, 1), game, kind, opt).policy);
  };
  const auto rewards = [](const Evaluation& e, RewardKind kind) {
    std::vector<double> v;
    for (const auto& r : e.results) v.push_back(reward(kind, r));
    return v;
  };

  {
    const auto kind = RewardKind::Cooperation;
    const auto policy = trained(kind, 600);
    const auto learned = evaluate_policy(policy, eval, game, kind, 100, jobs());
    const auto random = evaluate_heuristic(policy_from_name("RANDOM"), eval, game, kind, 100, jobs());
    const auto good = evaluate_heuristic(policy_from_name("GOOD"), eval, game, kind, 100, jobs());
    const auto l = rewards(learned, kind), g = rewards(good, kind);
    std::vector<double> diff(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) diff[i] = l[i] - g[i];
    const Sample d = sample(diff);
    o.note("cooperation policy (600 updates): learned " + fmt(learned.mean_reward) + ", RANDOM " +
           fmt(random.mean_reward) + ", GOOD " + fmt(good.mean_reward) + " over 100 paired eval episodes");
    o.check(learned.mean_reward >= random.mean_reward + 0.1, "(c) learned >= RANDOM + 0.1");
    o.check(d.hi() >= 0.0, "(c) learned within sampling error of or above GOOD (paired difference " + show(d) + ")");
  }

  {
    const auto kind = RewardKind::Engagement;
    const auto policy = trained(kind, 600);
    const auto learned = evaluate_policy(policy, eval, game, kind, 1000, jobs());
    const auto random = evaluate_heuristic(policy_from_name("RANDOM"), eval, game, kind, 1000, jobs());
    o.check(learned.mean_reward >= 1.2 * random.mean_reward,
            "(d) engagement policy (600 updates) rewire requests " + fmt(learned.mean_reward, 2) + " >= 1.2 x RANDOM " +
                fmt(random.mean_reward, 2) + " = " + fmt(1.2 * random.mean_reward, 2) + " over 1000 eval episodes");
  }
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "coopnet_acceptance_determinism";
  fs::remove_all(root);

  std::vector<nlohmann::json> configs{
      {{"kind", "Run"}, {"N", 30}, {"policies", {"GOOD", "BAD", "NO_MED", "any_max"}}, {"replicates", 8}, {"seed", 11}},
      {{"kind", "SweepW"}, {"N", 30}, {"policy", "FAIR"}, {"W_values", {0, 0.5, "inf"}}, {"replicates", 4}},
      {{"kind", "SweepTS"}, {"N", 10}, {"grid", 3}, {"replicates", 3}, {"seed", 2}},
      {{"kind", "SweepW1W2"}, {"N", 100}, {"mix", "NO_MED:0.5,GOOD:0.3,BAD:0.2"}, {"W_values", {1}},
       {"W2_values", {0, 0.5}}, {"replicates", 3}, {"time_limit", 3000}},
      {{"kind", "Train"}, {"N", 10}, {"updates", 4}, {"batch_size", 4}, {"replicates", 5}, {"reward", "engagement"}},
  };
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto spec = parse_config(configs[i]);
    const fs::path a = root / (std::to_string(i) + "a"), b = root / (std::to_string(i) + "b");
    emit(spec, run_experiment(spec, 1), a);
    const auto again = parse_config(nlohmann::json::parse(slurp(a / "manifest.json")));
    emit(again, run_experiment(again, jobs() + 2), b);
    const auto first = slurp(a / "results.csv");
    o.check(!first.empty() && first == slurp(b / "results.csv"),
            to_string(spec.kind) + ": rerun from manifest gives byte-identical results.csv (" +
                std::to_string(std::count(first.begin(), first.end(), '\n') - 1) + " rows)");
  }
  fs::remove_all(root);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"mechanics unit suite", mechanics},
      {"phase diagram without rewiring", phase_diagram},
      {"heuristic ordering", heuristic_ordering},
      {"topology: local recommender is most heterogeneous", topology},
      {"competition table", competition_table},
      {"policy learning", learning_criteria},
      {"determinism from manifest", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.contains(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome result;
    try {
      result = criteria[i].second();
    } catch (const std::exception& e) {
      result.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (result.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << criteria[i].first << " ("
              << fmt(secs, 1) << " s)\n";
    for (const auto& d : result.details) std::cout << "      " << d << "\n";
    std::cout.flush();
    if (!result.pass) ++failures;
  }
  std::cout << (failures == 0 ? "all selected criteria passed" : std::to_string(failures) + " criteria failed")
            << "\n";
  return failures == 0 ? 0 : 1;
}
