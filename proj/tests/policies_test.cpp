#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "coopnet/policies.hpp"
#include "support.hpp"

namespace coopnet {
namespace {

using testing::make_state;

std::map<NodeId, int> tally(const RewirePolicy& p, const NetworkState& s, NodeId x, NodeId y,
                            const CandidatePool& pool, int draws, int& none) {
  Rng rng(42);
  std::map<NodeId, int> counts;
  none = 0;
  for (int i = 0; i < draws; ++i) {
    if (auto z = recommend(p, s, x, y, pool, rng)) ++counts[*z];
    else ++none;
  }
  return counts;
}

void expect_uniform(const std::map<NodeId, int>& counts, const std::set<NodeId>& support, int draws) {
  std::set<NodeId> seen;
  for (const auto& [z, n] : counts) seen.insert(z);
  EXPECT_EQ(seen, support);
  const double p = 1.0 / static_cast<double>(support.size());
  const double sd = std::sqrt(draws * p * (1 - p));
  for (const auto& [z, n] : counts) EXPECT_NEAR(n, draws * p, 5 * sd) << "node " << z;
}

TEST(CandidatePool, CompleteGraphHasNoCandidates) {
  const auto s = testing::complete_graph(6);
  EXPECT_TRUE(candidate_pool(s, 0, 1).empty());
}

TEST(CandidatePool, PathExcludesFocusNeighborsAndDroppedNode) {
  const auto s = testing::path_graph(5, "CDCDC");
  EXPECT_EQ(candidate_pool(s, 0, 1).members, (std::vector<NodeId>{2, 3, 4}));
}

TEST(CandidatePool, ExclusivityIntersectsWithMediatorUsers) {
  const auto s = testing::path_graph(5, "CDCDC");
  const std::vector<MediatorId> assignment{0, 0, 1, 0, 1};
  const Exclusivity only_m{assignment, 1};
  EXPECT_EQ(candidate_pool(s, 0, 1, &only_m).members, (std::vector<NodeId>{2, 4}));
}

// Focus 0 with neighbor 1; the rest (2..5) are free. Cooperators {2,5}, defector {3}.
NetworkState good_pool_state() { return make_state({{0, 1}, {0, 4}}, "DDCDCC"); }

TEST(Recommend, GoodPicksCooperatorsUniformly) {
  const auto s = good_pool_state();
  const auto pool = candidate_pool(s, 0, 1);
  ASSERT_EQ(pool.members, (std::vector<NodeId>{2, 3, 5}));
  int none = 0;
  const auto counts = tally(policy_from_name("GOOD"), s, 0, 1, pool, 4000, none);
  EXPECT_EQ(none, 0);
  expect_uniform(counts, {2, 5}, 4000);
}

TEST(Recommend, HighestDegreeTiesBrokenUniformly) {
  // Pool {1, 4, 7} with degrees 2, 5, 5.
  std::vector<Edge> edges{{1, 2}, {1, 3}};
  for (NodeId z : {2, 3, 5, 6, 8}) edges.emplace_back(4, z);
  for (NodeId z : {2, 3, 5, 6, 8}) edges.emplace_back(7, z);
  for (NodeId z : {2, 3, 5, 6, 8}) edges.emplace_back(0, z);
  edges.emplace_back(0, 9);
  const auto s = make_state(edges, "CCCCCCCCCC");
  const auto pool = candidate_pool(s, 0, 9);
  ASSERT_EQ(pool.members, (std::vector<NodeId>{1, 4, 7}));
  ASSERT_EQ(s.degree(1), 2u);
  ASSERT_EQ(s.degree(4), 5u);
  int none = 0;
  const RewirePolicy any_max{GridPolicy{StrategyFilter::Any, DegreeSelector::Highest}, "any_max"};
  expect_uniform(tally(any_max, s, 0, 9, pool, 4000, none), {4, 7}, 4000);
}

TEST(Recommend, GoodWithOnlyDefectorsRecommendsNothing) {
  const auto s = make_state({{0, 1}}, "CDDDD");
  int none = 0;
  const auto counts = tally(policy_from_name("GOOD"), s, 0, 1, candidate_pool(s, 0, 1), 100, none);
  EXPECT_TRUE(counts.empty());
  EXPECT_EQ(none, 100);
}

TEST(Recommend, NullNeverRecommends) {
  const auto s = good_pool_state();
  int none = 0;
  EXPECT_TRUE(tally(policy_from_name("NULL"), s, 0, 1, candidate_pool(s, 0, 1), 50, none).empty());
}

TEST(Recommend, LocalPicksNeighborsOfDroppedNode) {
  // y = 1 has neighbors {0, 2, 3, 4}; x = 0 already links to 3.
  const auto s = make_state({{0, 1}, {1, 2}, {1, 3}, {1, 4}, {0, 3}, {4, 5}}, "CDCDCC");
  int none = 0;
  expect_uniform(tally(policy_from_name("NO_MED"), s, 0, 1, candidate_pool(s, 0, 1), 3000, none), {2, 4}, 3000);
  const auto lonely = make_state({{0, 1}, {2, 3}}, "CDCC");
  tally(policy_from_name("NO_MED"), lonely, 0, 1, candidate_pool(lonely, 0, 1), 10, none);
  EXPECT_EQ(none, 10);
}

TEST(Recommend, FairMirrorsFocusStrategy) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto s = testing::random_state(12, 0.3, seed);
    for (NodeId x = 0; x < s.size(); ++x) {
      if (s.degree(x) == 0) continue;
      const NodeId y = s.neighbors(x)[0];
      const auto pool = candidate_pool(s, x, y);
      Rng a(seed), b(seed);
      const auto fair = recommend(policy_from_name("FAIR"), s, x, y, pool, a);
      const auto mirror = recommend(policy_from_name(s.strategy(x) == Strategy::Cooperate ? "GOOD" : "BAD"),
                                    s, x, y, pool, b);
      EXPECT_EQ(fair, mirror);
    }
  }
}

TEST(Registry, NamesResolveToExpectedKinds) {
  const auto good = policy_from_name("GOOD");
  ASSERT_TRUE(std::holds_alternative<GridPolicy>(good.kind));
  EXPECT_EQ(std::get<GridPolicy>(good.kind).filter, StrategyFilter::CooperatorsOnly);
  EXPECT_EQ(std::get<GridPolicy>(good.kind).degree, DegreeSelector::Random);
  EXPECT_TRUE(std::holds_alternative<LocalPolicy>(policy_from_name("NO_MED").kind));
  EXPECT_TRUE(std::holds_alternative<NullPolicy>(policy_from_name("NULL").kind));
  EXPECT_TRUE(std::holds_alternative<FairPolicy>(policy_from_name("FAIR").kind));
  const auto bad = std::get<GridPolicy>(policy_from_name("BAD").kind);
  EXPECT_EQ(bad.filter, StrategyFilter::DefectorsOnly);
  const auto cmin = std::get<GridPolicy>(policy_from_name("coop_min").kind);
  EXPECT_EQ(cmin.filter, StrategyFilter::CooperatorsOnly);
  EXPECT_EQ(cmin.degree, DegreeSelector::Lowest);
}

TEST(Registry, AliasesAndCaseInsensitivity) {
  EXPECT_EQ(policy_from_name("good").name, "GOOD");
  EXPECT_EQ(policy_from_name("Local").name, "NO_MED");
  EXPECT_EQ(policy_from_name("any_random").name, "RANDOM");
  EXPECT_EQ(policy_from_name("DEFECT_MAX").name, "defect_max");
  EXPECT_THROW(policy_from_name("gud"), UnknownPolicyName);
  EXPECT_THROW(policy_from_name(""), UnknownPolicyName);
}

TEST(Registry, EveryListedNameResolves) {
  const auto names = policy_names();
  EXPECT_EQ(names.size(), 14u);
  for (const auto& n : names) EXPECT_EQ(policy_from_name(n).name, n);
}

bool filter_ok(StrategyFilter f, Strategy s) {
  if (f == StrategyFilter::CooperatorsOnly) return s == Strategy::Cooperate;
  if (f == StrategyFilter::DefectorsOnly) return s == Strategy::Defect;
  return true;
}

TEST(RecommendProperty, RecommendationsRespectPoolFilterAndDegreeRule) {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    auto s = testing::random_state(5 + seed % 12, 0.15 + 0.5 * static_cast<double>(seed % 5) / 5.0, seed);
    std::vector<MediatorId> assignment(s.size());
    Rng rng(seed);
    for (auto& m : assignment) m = static_cast<MediatorId>(uniform_index(rng, 3));
    for (NodeId x = 0; x < s.size(); ++x) {
      for (NodeId y : s.neighbors(x)) {
        const Exclusivity excl{assignment, assignment[x]};
        for (const Exclusivity* e : {static_cast<const Exclusivity*>(nullptr), &excl}) {
          const auto pool = candidate_pool(s, x, y, e);
          for (const auto& name : policy_names()) {
            const auto policy = policy_from_name(name);
            const auto z = recommend(policy, s, x, y, pool, rng);
            if (!z) continue;
            EXPECT_NE(*z, x);
            EXPECT_NE(*z, y);
            EXPECT_FALSE(s.has_edge(x, *z));
            if (e) {
              EXPECT_EQ(assignment[*z], assignment[x]);
            }
            if (std::holds_alternative<LocalPolicy>(policy.kind)) {
              EXPECT_TRUE(s.has_edge(y, *z));
            }
            if (const auto* g = std::get_if<GridPolicy>(&policy.kind)) {
              EXPECT_TRUE(filter_ok(g->filter, s.strategy(*z))) << name;
              if (g->degree != DegreeSelector::Random) {
                std::size_t lo = s.size(), hi = 0;
                for (NodeId c : pool.members) {
                  if (!filter_ok(g->filter, s.strategy(c))) continue;
                  lo = std::min(lo, s.degree(c));
                  hi = std::max(hi, s.degree(c));
                }
                EXPECT_EQ(s.degree(*z), g->degree == DegreeSelector::Lowest ? lo : hi) << name;
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace
}  // namespace coopnet
