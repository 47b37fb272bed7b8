#include <random>

#include "doctest.h"
#include "sebn/bayes/inference.hpp"
#include "sebn/search/candidates.hpp"
#include "support/oracles.hpp"

using namespace sebn;
using search::Mode;

namespace {

model::Phi random_phi(const model::SebnSpec& spec, std::mt19937_64& rng) {
  model::Phi phi;
  std::gamma_distribution<double> g(1.0, 1.0);
  for (const auto& id : spec.base_competencies()) {
    std::vector<double> v(spec.domain_size(id));
    double s = 0;
    for (double& x : v) s += (x = g(rng) + 1e-3);
    for (double& x : v) x /= s;
    phi[id] = v;
  }
  return phi;
}

// Previous parameters plus a step toward another random point.
std::pair<model::Phi, model::Phi> phi_pair(const model::SebnSpec& spec, std::mt19937_64& rng) {
  const model::Phi a = random_phi(spec, rng);
  const model::Phi b = random_phi(spec, rng);
  model::Phi next = a;
  for (auto& [id, v] : next) {
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = 0.5 * a.at(id)[k] + 0.5 * b.at(id)[k];
  }
  return {a, next};
}

// P(target = 1 | env) by summing over competency assignments with direct CPT
// lookups; valid when every competency is a root and the target's parents are
// env features and competencies only.
double naive_success(const bayes::Network& net, int target, const std::vector<int>& env) {
  const auto env_vars = net.indices_in_layer(bayes::Layer::kEnvironment);
  const auto comps = net.indices_in_layer(bayes::Layer::kCompetency);
  std::vector<int> dims;
  for (int c : comps) dims.push_back(net.variable(c).domain_size);
  std::vector<int> full(net.size(), 0);
  for (std::size_t k = 0; k < env_vars.size(); ++k) full[env_vars[k]] = env[k];
  double p = 0.0;
  testing::for_each_assignment(dims, [&](const std::vector<int>& psi) {
    double w = 1.0;
    for (std::size_t k = 0; k < comps.size(); ++k) {
      full[comps[k]] = psi[k];
      w *= net.cpt(comps[k]).values()[psi[k]];
    }
    std::vector<int> row;
    for (int s : net.cpt(target).scope()) row.push_back(s == target ? 1 : full[s]);
    p += w * net.cpt(target).at(row);
  });
  return p;
}

std::vector<std::vector<int>> envs(const search::CandidateSet& set) {
  std::vector<std::vector<int>> out;
  for (const auto& c : set.candidates) out.push_back(c.env);
  return out;
}

double overlap(const search::CandidateSet& a, const search::CandidateSet& b) {
  std::set<std::vector<int>> sa;
  for (const auto& c : a.candidates) sa.insert(c.env);
  int hit = 0;
  for (const auto& c : b.candidates) hit += sa.count(c.env);
  return static_cast<double>(hit) / b.candidates.size();
}

}  // namespace

TEST_CASE("heuristic formula") {
  CHECK(search::heuristic_formula(0.5, 0.8) == doctest::Approx(0.376).epsilon(5e-4));
  CHECK(search::heuristic_formula(0.5, 0.8) == doctest::Approx(std::abs(std::log(0.5 / 0.8)) * 0.8).epsilon(1e-14));
  CHECK(search::heuristic_formula(0.3, 0.3) == 0.0);
  CHECK(search::heuristic_formula(0.0, 0.0) == 0.0);
  CHECK(search::heuristic_formula(0.0, 0.5) == doctest::Approx(std::abs(std::log(1e-12 / 0.5)) * 0.5));
}

TEST_CASE("identical networks score zero everywhere") {
  const auto net = model::assemble_sebn(testing::load_fixture("doorkey.spec"));
  const int goal = net.index_of("goalreached");
  CHECK(search::node_heuristic(net, net, {}, goal).value == 0.0);
  search::SearchConfig cfg;
  cfg.expansions = 7;
  cfg.n = 8;
  cfg.target = goal;
  const auto set = search::select_candidates(net, net, cfg);
  CHECK(set.candidates.size() == 8);
  for (const auto& c : set.candidates) CHECK(c.heuristic.value <= 1e-12);
  const auto ranked = search::exhaustive_rank(net, net, model::enumerate_env_space(testing::load_fixture("doorkey.spec")),
                                              3, Mode::kMax, goal);
  CHECK(envs(ranked) == std::vector<std::vector<int>>{{0, 0, 0}, {0, 0, 1}, {0, 1, 0}});
}

TEST_CASE("one binary feature is fully enumerated") {
  model::SebnSpec spec;
  spec.env_vars = {{"f", 2}};
  spec.competency_vars = {{"c", 2, true}};
  spec.target_vars = {"t"};
  spec.terminal_target = "t";
  spec.phi_base = {{"c", {0.5, 0.5}}};
  spec.requirement_lines = {{"t", {{"f", 1}}, {{"c", 1}}}};
  const auto prev = model::assemble_sebn(spec);
  const auto next = model::assemble_sebn(spec, model::Phi{{"c", {0.2, 0.8}}});
  search::SearchConfig cfg;
  cfg.expansions = 1;
  cfg.n = 2;
  const auto set = search::select_candidates(prev, next, cfg);
  CHECK(envs(set) == std::vector<std::vector<int>>{{1}, {0}});
  CHECK(set.candidates[1].heuristic.value == 0.0);
  CHECK(set.expansions + set.frontier == 1 + set.generated);
}

TEST_CASE("DoorKey search with enough expansions equals the exhaustive ranking") {
  const auto spec = testing::load_fixture("doorkey.spec");
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto [a, b] = phi_pair(spec, rng);
    const auto prev = model::assemble_sebn(spec, a), next = model::assemble_sebn(spec, b);
    const int goal = prev.index_of("goalreached");
    for (Mode mode : {Mode::kMax, Mode::kMin}) {
      for (int n : {1, 3, 8}) {
        search::SearchConfig cfg;
        cfg.expansions = 7;
        cfg.n = n;
        cfg.mode = mode;
        cfg.seed = trial;
        cfg.target = goal;
        const auto got = search::select_candidates(prev, next, cfg);
        const auto want = search::exhaustive_rank(prev, next, model::enumerate_env_space(spec), n, mode, goal);
        CHECK(envs(got) == envs(want));
        CHECK(overlap(got, want) == 1.0);
      }
    }
  }
}

TEST_CASE("exhaustive ranking on BipedalWalker matches a naive scorer") {
  const auto spec = testing::load_fixture("bipedalwalker.spec");
  std::mt19937_64 rng(5);
  const auto [a, b] = phi_pair(spec, rng);
  const auto prev = model::assemble_sebn(spec, a), next = model::assemble_sebn(spec, b);
  const int goal = prev.index_of("goalreached");
  const auto space = model::enumerate_env_space(spec);
  REQUIRE(space.size() == 1536);
  const auto ranked = search::exhaustive_rank(prev, next, space, 1536, Mode::kMax, goal);
  REQUIRE(ranked.candidates.size() == 1536);

  std::vector<std::pair<double, std::vector<int>>> naive;
  for (const auto& env : space) {
    const double p0 = naive_success(prev, goal, env), p1 = naive_success(next, goal, env);
    naive.push_back({std::abs(std::log(std::max(p0, 1e-12)) - std::log(std::max(p1, 1e-12))) * std::max(p1, 1e-12), env});
  }
  for (const auto& c : ranked.candidates) {
    CHECK(c.heuristic.p_prev == doctest::Approx(naive_success(prev, goal, c.env)).epsilon(1e-12));
  }
  std::sort(naive.begin(), naive.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t k = 0; k < 20; ++k) {
    CHECK(ranked.candidates[k].heuristic.value == doctest::Approx(naive[k].first).epsilon(1e-10));
  }
  CHECK_THROWS_AS(search::exhaustive_rank(prev, next, space, 20, Mode::kMax, goal, 1000), std::invalid_argument);
}

TEST_CASE("BipedalWalker search overlaps the exhaustive top 20") {
  const auto spec = testing::load_fixture("bipedalwalker.spec");
  const auto space = model::enumerate_env_space(spec);
  std::vector<double> overlaps;
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const auto [a, b] = phi_pair(spec, rng);
    const auto prev = model::assemble_sebn(spec, a), next = model::assemble_sebn(spec, b);
    search::SearchConfig cfg;
    cfg.expansions = 100;
    cfg.n = 20;
    cfg.seed = seed;
    const auto got = search::select_candidates(prev, next, cfg);
    CHECK(got.candidates.size() == 20);
    CHECK(got.expansions + got.frontier == 1 + got.generated);
    overlaps.push_back(overlap(got, search::exhaustive_rank(prev, next, space, 20)));
  }
  std::sort(overlaps.begin(), overlaps.end());
  const double median = 0.5 * (overlaps[9] + overlaps[10]);
  MESSAGE("median overlap " << median << " min " << overlaps.front() << " max " << overlaps.back());
  CHECK(median >= 0.5);
}

TEST_CASE("search properties") {
  const auto spec = testing::load_fixture("bipedalwalker.spec");
  std::mt19937_64 rng(77);
  const auto [a, b] = phi_pair(spec, rng);
  const auto prev = model::assemble_sebn(spec, a), next = model::assemble_sebn(spec, b);
  search::SearchConfig cfg;
  cfg.expansions = 25;
  cfg.n = 10;
  cfg.seed = 4;
  const auto x = search::select_candidates(prev, next, cfg);
  const auto y = search::select_candidates(prev, next, cfg);
  CHECK(envs(x) == envs(y));
  CHECK(x.expansions == 25);
  CHECK(x.expansions + x.frontier == 1 + x.generated);
  const auto listed = envs(x);
  std::set<std::vector<int>> unique(listed.begin(), listed.end());
  CHECK(unique.size() == x.candidates.size());

  // Non-negative on random partial assignments.
  const auto env_vars = prev.indices_in_layer(bayes::Layer::kEnvironment);
  const search::NodeScorer scorer(prev, next, prev.index_of("goalreached"));
  CHECK(scorer.exact());
  for (int k = 0; k < 50; ++k) {
    bayes::Evidence partial;
    for (int v : env_vars) {
      if (rng() % 2) partial[v] = std::uniform_int_distribution<int>(0, prev.variable(v).domain_size - 1)(rng);
    }
    CHECK(scorer.score(partial).value >= 0.0);
  }

  // Min mode reverses the exhaustive order when values are distinct.
  const auto doorkey = testing::load_fixture("doorkey.spec");
  const auto [c, d] = phi_pair(doorkey, rng);
  const auto p0 = model::assemble_sebn(doorkey, c), p1 = model::assemble_sebn(doorkey, d);
  auto hi = envs(search::exhaustive_rank(p0, p1, model::enumerate_env_space(doorkey), 8, Mode::kMax));
  const auto lo = envs(search::exhaustive_rank(p0, p1, model::enumerate_env_space(doorkey), 8, Mode::kMin));
  std::reverse(hi.begin(), hi.end());
  CHECK(hi == lo);
}

TEST_CASE("search errors and dump") {
  const auto doorkey = model::assemble_sebn(testing::load_fixture("doorkey.spec"));
  const auto walker = model::assemble_sebn(testing::load_fixture("bipedalwalker.spec"));
  CHECK_THROWS_AS(search::node_heuristic(doorkey, walker, {}, 0), std::invalid_argument);
  search::SearchConfig cfg;
  cfg.expansions = 0;
  CHECK_THROWS_AS(search::select_candidates(doorkey, doorkey, cfg), std::invalid_argument);
  cfg.expansions = 3;
  cfg.ordering = {0, 1};
  CHECK_THROWS_AS(search::select_candidates(doorkey, doorkey, cfg), std::invalid_argument);
  cfg.ordering = {2, 0, 1};
  cfg.n = 2;
  const auto set = search::select_candidates(doorkey, doorkey, cfg);
  const auto dump = search::candidates_to_json(doorkey, set);
  REQUIRE(dump.size() == 2);
  CHECK(dump[0]["env"].contains("exists_door"));
  CHECK(dump[0]["heuristic"] == 0.0);
  CHECK(search::parse_mode("min") == Mode::kMin);
  CHECK_THROWS_AS(search::parse_mode("median"), std::invalid_argument);
}
