#include <random>

#include "doctest.h"
#include "sebn/bayes/inference.hpp"
#include "sebn/bayes/serialize.hpp"
#include "sebn/errors.hpp"
#include "support/oracles.hpp"

using namespace sebn;
using bayes::DiscreteVariable;
using bayes::FactorTable;
using bayes::Network;

namespace {

Network single_node(std::vector<double> prior) {
  const int dim = static_cast<int>(prior.size());
  return Network({{"move", dim, bayes::Layer::kCompetency}}, {FactorTable({0}, {dim}, std::move(prior))});
}

// A -> B -> C, binary.
Network chain() {
  return Network({{"A", 2}, {"B", 2}, {"C", 2}},
                 {FactorTable({0}, {2}, {0.3, 0.7}), FactorTable({0, 1}, {2, 2}, {0.9, 0.1, 0.2, 0.8}),
                  FactorTable({1, 2}, {2, 2}, {0.6, 0.4, 0.05, 0.95})});
}

Network doorkey() { return model::assemble_sebn(testing::load_fixture("doorkey.spec")); }

}  // namespace

TEST_CASE("elimination order on a chain keeps the target") {
  const Network net = chain();
  CHECK(bayes::elimination_order(net, {2}) == std::vector<int>{0, 1});
  CHECK(bayes::elimination_order(net, {0, 1, 2}).empty());
  CHECK_THROWS_AS(bayes::elimination_order(net, {7}), std::invalid_argument);
}

TEST_CASE("min-fill order on the DoorKey network adds no fill edges") {
  const Network net = doorkey();
  const int haskey = net.index_of("haskey");
  const auto order = bayes::elimination_order(net, {haskey});
  CHECK(order.size() == net.size() - 1);
  CHECK(std::find(order.begin(), order.end(), haskey) == order.end());
  for (int fill : testing::simulate_fill(net, order)) CHECK(fill == 0);
  CHECK(bayes::fill_edges_along(net, order) == testing::simulate_fill(net, order));
  // Deterministic.
  CHECK(bayes::elimination_order(net, {haskey}) == order);
}

TEST_CASE("marginal of a single ternary node is its prior") {
  const Network net = single_node({0.8, 0.2, 0.0});
  const auto m = bayes::query_marginal(net, {}, {0});
  CHECK(m.values() == std::vector<double>{0.8, 0.2, 0.0});
  CHECK(bayes::query_joint_assignment(net, {{0, 2}}) == 0.0);
  CHECK(bayes::query_joint_assignment(net, {{0, 0}}) == doctest::Approx(0.8));
}

TEST_CASE("deterministic row yields a point mass") {
  Network net({{"A", 2}, {"B", 3}},
              {FactorTable({0}, {2}, {0.5, 0.5}), FactorTable({0, 1}, {2, 3}, {0.2, 0.3, 0.5, 0.0, 1.0, 0.0})});
  const auto m = bayes::query_marginal(net, {{0, 1}}, {1});
  CHECK(m.values() == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("independent fair coins have joint probability 1/4") {
  Network net({{"a", 2}, {"b", 2}}, {FactorTable({0}, {2}, {0.5, 0.5}), FactorTable({1}, {2}, {0.5, 0.5})});
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) CHECK(bayes::query_joint_assignment(net, {{0, a}, {1, b}}) == 0.25);
  }
  CHECK_THROWS_AS(bayes::query_joint_assignment(net, {{0, 1}}), std::invalid_argument);
}

TEST_CASE("DoorKey goalreached matches brute-force enumeration") {
  const Network net = doorkey();
  const auto ev = net.make_evidence({{"distance", 1}, {"wall", 0}, {"exists_door", 1}});
  const int goal = net.index_of("goalreached");
  const auto exact = bayes::query_marginal(net, ev, {goal});
  CHECK(testing::max_abs_diff(exact.values(), testing::enumerate_marginal(net, ev, {goal})) <= 1e-12);
}

TEST_CASE("DoorKey joint assignment equals the product of conditionals") {
  const Network net = doorkey();
  bayes::Evidence full;
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    full.clear();
    for (int v = 0; v < static_cast<int>(net.size()); ++v) {
      full[v] = std::uniform_int_distribution<int>(0, net.variable(v).domain_size - 1)(rng);
    }
    double factored = 1.0;
    for (int v = 0; v < static_cast<int>(net.size()); ++v) {
      bayes::Evidence parents;
      for (int p : net.parents(v)) parents[p] = full[p];
      factored *= bayes::query_marginal(net, parents, {v}).values()[full[v]];
    }
    CHECK(bayes::query_joint_assignment(net, full) == doctest::Approx(factored).epsilon(1e-12));
  }
}

TEST_CASE("query errors") {
  const Network net = chain();
  CHECK_THROWS_AS(bayes::query_marginal(net, {}, {}), std::invalid_argument);
  CHECK_THROWS_AS(bayes::query_marginal(net, {{0, 5}}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(bayes::query_marginal(net, {}, {1, 1}), std::invalid_argument);
  Network impossible({{"a", 2}, {"b", 2}},
                     {FactorTable({0}, {2}, {1.0, 0.0}), FactorTable({0, 1}, {2, 2}, {1.0, 0.0, 0.0, 1.0})});
  CHECK_THROWS_AS(bayes::query_marginal(impossible, {{1, 1}}, {0}), ZeroProbabilityEvidence);
  CHECK_THROWS_AS(bayes::wmb_query(impossible, {{1, 1}}, {0}, 1), ZeroProbabilityEvidence);
  CHECK(std::isinf(bayes::log_probability_of_evidence(impossible, {{1, 1}})));
  CHECK_THROWS_AS(bayes::wmb_query(net, {}, {0}, 0), std::invalid_argument);
}

TEST_CASE("network validation") {
  CHECK_THROWS_AS(Network({{"a", 2}, {"a", 2}}, {FactorTable({0}, {2}, {0.5, 0.5}), FactorTable({1}, {2}, {0.5, 0.5})}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Network({{"a", 2}}, {FactorTable({0}, {2}, {0.5, 0.6})}), std::invalid_argument);
  CHECK_THROWS_AS(Network({{"a", 2}, {"b", 2}}, {FactorTable({1, 0}, {2, 2}, {1, 0, 0, 1}),
                                                 FactorTable({0, 1}, {2, 2}, {1, 0, 0, 1})}),
                  CycleError);
  CHECK_THROWS_AS(FactorTable({0}, {2}, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(FactorTable({0}, {2}, {-0.5, 1.5}), std::invalid_argument);
}

TEST_CASE("random networks agree with enumeration") {
  std::mt19937_64 rng(20240917);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 10)(rng);
    const Network net = testing::random_network(rng, n, 3, 200'000);
    // Random evidence that has positive probability.
    bayes::Evidence ev;
    for (int v = 0; v < n; ++v) {
      if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.3) {
        ev[v] = std::uniform_int_distribution<int>(0, net.variable(v).domain_size - 1)(rng);
      }
    }
    if (testing::enumerate_evidence_probability(net, ev) <= 0.0) continue;
    std::vector<int> targets;
    for (int v = 0; v < n; ++v) {
      if (!ev.count(v) && targets.size() < 2) targets.push_back(v);
    }
    if (targets.empty()) continue;
    const auto exact = bayes::query_marginal(net, ev, targets);
    CHECK(testing::max_abs_diff(exact.values(), testing::enumerate_marginal(net, ev, targets)) <= 1e-9);
    CHECK(bayes::log_probability_of_evidence(net, ev) ==
          doctest::Approx(std::log(testing::enumerate_evidence_probability(net, ev))).epsilon(1e-9));

    // Marginal consistency: summing out the second target gives the first alone.
    if (targets.size() == 2) {
      const auto single = bayes::query_marginal(net, ev, {targets[0]});
      const int d1 = net.variable(targets[1]).domain_size;
      std::vector<double> summed(single.size(), 0.0);
      for (std::size_t i = 0; i < exact.size(); ++i) summed[i / d1] += exact.values()[i];
      CHECK(testing::max_abs_diff(summed, single.values()) <= 1e-9);
    }

    // Evidence idempotence.
    if (!ev.empty()) {
      const auto [var, value] = *ev.begin();
      const auto point = bayes::query_marginal(net, ev, {var});
      for (int k = 0; k < net.variable(var).domain_size; ++k) CHECK(point.values()[k] == (k == value ? 1.0 : 0.0));
    }

    // Mini-buckets never split when ibound covers the induced width.
    std::set<int> keep(targets.begin(), targets.end());
    const int width = bayes::induced_width(net, bayes::elimination_order(net, keep));
    const auto wmb = bayes::wmb_query(net, ev, targets, std::max(width, 1));
    CHECK(testing::max_abs_diff(wmb.values(), exact.values()) <= 1e-9);

    // Bit-identical on repeat.
    CHECK(bayes::query_marginal(net, ev, targets) == exact);
  }
}

TEST_CASE("wmb with a large ibound equals exact inference on DoorKey") {
  const Network net = doorkey();
  const auto ev = net.make_evidence({{"distance", 0}, {"wall", 1}});
  for (const char* t : {"goalreached", "dooropened", "haskey", "avoid_wall"}) {
    const int target = net.index_of(t);
    CHECK(testing::max_abs_diff(bayes::wmb_query(net, ev, {target}, 20).values(),
                                bayes::query_marginal(net, ev, {target}).values()) <= 1e-9);
  }
}

TEST_CASE("wmb with a small ibound on BipedalWalker stays a distribution") {
  const Network net = model::assemble_sebn(testing::load_fixture("bipedalwalker.spec"));
  const int goal = net.index_of("goalreached");
  const auto ev = net.make_evidence({{"pit_gap", 2}});
  const auto exact = bayes::query_marginal(net, ev, {goal});
  const auto approx = bayes::wmb_query(net, ev, {goal}, 2);
  CHECK(approx.sum() == doctest::Approx(1.0));
  for (double v : approx.values()) CHECK(v >= 0.0);
  MESSAGE("BipedalWalker ibound=2 total variation: " << testing::total_variation(approx.values(), exact.values()));
}

TEST_CASE("network JSON round trip is lossless") {
  const Network net = doorkey();
  const auto doc = bayes::network_to_json(net);
  CHECK(doc["version"] == bayes::kNetworkFormatVersion);
  const Network back = bayes::network_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(back == net);

  std::mt19937_64 rng(11);
  const Network random = testing::random_network(rng, 6, 2);
  CHECK(bayes::network_from_json(nlohmann::json::parse(bayes::network_to_json(random).dump())) == random);
  CHECK_THROWS_AS(bayes::network_from_json(nlohmann::json{{"format", "other"}}), ConfigurationError);
}
