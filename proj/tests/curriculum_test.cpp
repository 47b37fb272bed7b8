#include <sstream>

#include "doctest.h"
#include "sebn/curriculum/grid_runner.hpp"
#include "sebn/grid/megagrid.hpp"
#include "support/oracles.hpp"

using namespace sebn;
using curriculum::Curriculum;
using curriculum::CurriculumConfig;
using curriculum::GenerationStats;
using curriculum::TaskDistribution;
using curriculum::Variant;

namespace {

model::SebnSpec doorkey_spec() { return testing::load_fixture("doorkey.spec"); }

CurriculumConfig doorkey_config(Variant variant, std::uint64_t seed = 0) {
  CurriculumConfig c;
  c.variant = variant;
  c.seed = seed;
  c.eval_task = grid::doorkey_descriptor({0, 1, 1});
  c.task_for_env = grid::doorkey_descriptor;
  return c;
}

model::Phi mid_truth() {
  return {{"move", {0.2, 0.3, 0.5}}, {"pick_up", {0.3, 0.7}}, {"avoid_wall", {0.6, 0.4}},
          {"drop", {0.5, 0.5}},      {"open_door", {0.25, 0.75}}};
}

class ThrowingRunner : public curriculum::EpisodeRunner {
 public:
  model::RolloutRecord run(const model::TaskDescriptor& task, std::uint64_t seed) override {
    if (seed % 2) throw std::runtime_error("learner crashed");
    model::RolloutRecord r{task, {}, 0};
    for (const auto& t : task.enabled_targets) r.outcomes[t] = true;
    return r;
  }
};

// The update written out from the recorded generation only.
std::vector<double> hand_update(const GenerationStats& stats) {
  double total = 0.0;
  for (const auto& t : stats.tasks) total += (t.pred_curr - t.pred_prev) * (t.pred_curr - t.pred_prev);
  std::vector<double> out;
  for (const auto& t : stats.tasks) {
    const double f = (t.pred_curr - t.pred_prev) * (t.pred_curr - t.pred_prev);
    out.push_back(0.5 * (total < 1e-12 ? 1.0 / stats.tasks.size() : f / total) + 0.5 * t.weight_before);
  }
  double sum = 0.0;
  for (double w : out) sum += w;
  for (double& w : out) w /= sum;
  return out;
}

}  // namespace

TEST_CASE("initial distributions") {
  const auto uniform = curriculum::init_distribution(grid::doorkey_task_classes(), curriculum::InitMode::kUniform);
  REQUIRE(uniform.support.size() == 8);
  for (double w : uniform.weights) CHECK(w == 0.125);
  CHECK(uniform.generation == 0);

  const auto easy = curriculum::init_distribution({{{0, 0, 0}, {"goalreached"}}, {{1, 0, 0}, {"goalreached"}}},
                                                  curriculum::InitMode::kEasyBiased);
  CHECK(easy.weights[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(easy.weights[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(curriculum::init_distribution({}, curriculum::InitMode::kUniform), std::invalid_argument);
}

TEST_CASE("fitness") {
  CHECK(curriculum::fitness(0.5, 0.7) == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(curriculum::fitness(0.3, 0.3) == 0.0);
  CHECK(curriculum::anti_fitness(0.5, 0.7) == doctest::Approx(0.96).epsilon(1e-14));
  CHECK(curriculum::anti_fitness(0.5, 0.7, curriculum::AntiFitness::kSquaredComplement) ==
        doctest::Approx(0.64).epsilon(1e-14));
}

TEST_CASE("update examples") {
  TaskDistribution d;
  d.support = {{{0}, {"t"}}, {{1}, {"t"}}};
  d.weights = {0.5, 0.5};
  GenerationStats s;
  s.tasks = {{d.support[0], 0.5, 0.7, 0.04}, {d.support[1], 0.3, 0.3, 0.0}};
  auto next = curriculum::update_distribution(d, s);
  CHECK(next.weights[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(next.weights[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(next.generation == 1);

  d.weights = {0.9, 0.1};
  s.tasks[0].fitness = 0.0;
  next = curriculum::update_distribution(d, s);
  CHECK(next.weights[0] == doctest::Approx(0.5 * 0.5 + 0.5 * 0.9).epsilon(1e-15));
  CHECK(next.weights[1] == doctest::Approx(0.5 * 0.5 + 0.5 * 0.1).epsilon(1e-15));

  s.tasks.pop_back();
  CHECK_THROWS_AS(curriculum::update_distribution(d, s), std::invalid_argument);

  // A candidate outside the support joins it from weight zero.
  s.tasks = {{d.support[0], 0, 0, 1.0}, {d.support[1], 0, 0, 0.0}, {{{2}, {"t"}}, 0, 0, 1.0}};
  next = curriculum::update_distribution(d, s);
  REQUIRE(next.support.size() == 3);
  CHECK(next.weights[2] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(next.weights[0] == doctest::Approx(0.25 + 0.45).epsilon(1e-15));
}

TEST_CASE("recorded DoorKey generations match a hand computation") {
  const auto spec = doorkey_spec();
  Curriculum c(spec, doorkey_config(Variant::kSebn, 3));
  curriculum::SyntheticRunner runner(spec, mid_truth());
  for (int g = 0; g < 6; ++g) {
    const auto before = c.distribution();
    const auto& stats = c.run_generation(runner);
    REQUIRE(stats.tasks.size() == 8);
    const auto expected = hand_update(stats);
    double sum = 0.0;
    for (std::size_t i = 0; i < stats.tasks.size(); ++i) {
      const auto& t = stats.tasks[i];
      CHECK(t.weight_before == before.weight_of(t.task));
      CHECK(std::abs(t.weight_after - expected[i]) <= 1e-12);
      CHECK(t.weight_after >= 0.5 * t.weight_before - 1e-15);
      CHECK(t.pred_prev >= 0.0);
      CHECK(t.pred_curr <= 1.0);
      sum += t.weight_after;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    CHECK(c.distribution().generation == g + 1);
    c.distribution().validate();
  }
  CHECK(c.rollouts().size() == 6 * 32u);
}

TEST_CASE("generation predictions use the previous and the new estimate") {
  const auto spec = doorkey_spec();
  Curriculum c(spec, doorkey_config(Variant::kSebn, 1));
  curriculum::SyntheticRunner runner(spec, mid_truth());
  const auto first = c.run_generation(runner);
  const auto& second = c.run_generation(runner);
  for (std::size_t i = 0; i < second.tasks.size(); ++i) {
    CHECK(second.tasks[i].pred_prev == doctest::Approx(first.tasks[i].pred_curr).epsilon(1e-12));
  }
  const auto net = model::assemble_sebn(spec, spec.phi_base);
  CHECK(first.tasks[0].pred_prev == doctest::Approx(model::predict_success(net, first.tasks[0].task, "goalreached")));
}

TEST_CASE("control variants") {
  const auto spec = doorkey_spec();
  curriculum::SyntheticRunner runner(spec, mid_truth());

  Curriculum uniform(spec, doorkey_config(Variant::kUniform));
  for (int g = 0; g < 4; ++g) uniform.run_generation(runner);
  for (double w : uniform.distribution().weights) CHECK(w == 0.125);

  Curriculum none(spec, doorkey_config(Variant::kNone));
  for (int g = 0; g < 3; ++g) none.run_generation(runner);
  for (const auto& r : none.rollouts()) CHECK(r.task == grid::doorkey_descriptor({0, 1, 1}));
  CHECK(none.distribution().support.size() == 1);

  auto missing = doorkey_config(Variant::kNone);
  missing.eval_task.reset();
  CHECK_THROWS_AS(Curriculum(spec, missing), std::invalid_argument);

  auto empty = doorkey_config(Variant::kSebn);
  empty.generation_size = 0;
  CHECK_THROWS_AS(Curriculum(spec, empty), std::invalid_argument);

  Curriculum anti(spec, doorkey_config(Variant::kAnti));
  const auto& stats = anti.run_generation(runner);
  for (const auto& t : stats.tasks) {
    CHECK(t.fitness == doctest::Approx(1.0 - (t.pred_curr - t.pred_prev) * (t.pred_curr - t.pred_prev)));
  }
}

TEST_CASE("always-failing learner drives competencies to level 0") {
  const auto spec = doorkey_spec();
  auto config = doorkey_config(Variant::kSebn, 4);
  Curriculum c(spec, config);
  learn::IdleAgent idle;
  curriculum::GridRunner runner(idle);
  model::Phi before;
  for (int g = 0; g < 3; ++g) {
    before = c.phi();
    c.run_generation(runner);
  }
  for (const auto& r : c.rollouts()) {
    for (const auto& [t, ok] : r.outcomes) CHECK(!ok);
  }
  // Same answer offline from the last generation's log.
  std::vector<model::RolloutRecord> last(c.rollouts().end() - 32, c.rollouts().end());
  estimate::EmConfig em = config.em;
  em.initial = before;
  em.seed = config.em.seed + 1000003ULL * 3 + config.seed;
  const auto offline = estimate::estimate_phi(spec, last, em);
  CHECK(offline.phi == c.phi());
  CHECK(c.phi().at("move")[0] >= 0.95);
  for (const auto& id : estimate::identified_competencies(spec, last)) {
    MESSAGE(id << " level-0 mass " << c.phi().at(id)[0]);
  }
}

TEST_CASE("oracle learner shifts mass toward harder tasks") {
  const auto spec = doorkey_spec();
  auto config = doorkey_config(Variant::kSebn, 2);
  config.init = curriculum::InitMode::kEasyBiased;
  Curriculum c(spec, config);
  learn::OracleAgent oracle;
  curriculum::GridRunner runner(oracle);
  std::vector<double> difficulty{c.distribution().expected_difficulty()};
  for (int g = 0; g < 5; ++g) {
    c.run_generation(runner);
    difficulty.push_back(c.distribution().expected_difficulty());
  }
  CHECK(difficulty[1] > difficulty[0]);
  CHECK(difficulty.back() > difficulty.front());
  std::ostringstream trend;
  for (double d : difficulty) trend << d << ' ';
  MESSAGE("expected difficulty " << trend.str());
}

TEST_CASE("learner exceptions count as failures") {
  const auto spec = doorkey_spec();
  Curriculum c(spec, doorkey_config(Variant::kSebn, 5));
  ThrowingRunner runner;
  const auto& stats = c.run_generation(runner);
  CHECK(stats.learner_failures > 0);
  CHECK(c.learner_failures() == stats.learner_failures);
  int failed = 0;
  for (const auto& r : c.rollouts()) {
    bool any = false;
    for (const auto& [t, ok] : r.outcomes) any |= ok;
    failed += !any;
    CHECK(r.outcomes.size() == r.task.enabled_targets.size());
  }
  CHECK(failed == stats.learner_failures);
}

TEST_CASE("history is reproducible") {
  const auto spec = doorkey_spec();
  auto run = [&] {
    Curriculum c(spec, doorkey_config(Variant::kSebn, 9));
    curriculum::SyntheticRunner runner(spec, mid_truth());
    std::ostringstream out;
    curriculum::write_history_header(out);
    for (int g = 0; g < 3; ++g) curriculum::write_history_rows(out, spec, c.run_generation(runner));
    return out.str();
  };
  const std::string a = run();
  CHECK(a == run());
  CHECK(std::count(a.begin(), a.end(), '\n') == 1 + 3 * 8);
  CHECK(a.rfind("generation,task,weight_before,weight,fitness,pred_prev,pred_curr,rollouts,successes,realized\n", 0) == 0);
}

TEST_CASE("large design spaces go through candidate search") {
  const auto spec = testing::load_fixture("bipedalwalker.spec");
  CurriculumConfig config;
  config.seed = 3;
  config.exhaustive_threshold = 100;
  config.expansions = 40;
  Curriculum c(spec, config);
  CHECK(c.distribution().support.size() == 20);
  std::map<std::string, std::vector<double>> truth;
  for (const auto& [id, v] : spec.phi_base) {
    std::vector<double> p(v.size(), 0.0);
    p.back() = 1.0;
    truth[id] = p;
  }
  curriculum::SyntheticRunner runner(spec, truth);
  for (int g = 0; g < 2; ++g) {
    const auto& stats = c.run_generation(runner);
    CHECK(stats.used_search);
    REQUIRE(stats.candidates);
    CHECK(stats.candidates->candidates.size() == 20);
    c.distribution().validate();
  }
  CHECK(c.distribution().support.size() >= 20);

  config.variant = Variant::kAnti;
  Curriculum anti(spec, config);
  CHECK(anti.run_generation(runner).used_search);
}

TEST_CASE("policy evaluation") {
  learn::OracleAgent oracle;
  CHECK(curriculum::evaluate_policy(oracle, grid::doorkey_descriptor({1, 1, 1}), 20, 10, 10, 1) == 1.0);
  learn::RandomAgent random(3);
  const double r = curriculum::evaluate_policy(random, grid::doorkey_descriptor({0, 1, 1}), 100, 10, 10, 2);
  MESSAGE("random policy success on D0 W1 L1: " << r);
  CHECK(r < 0.5);
  CHECK_THROWS_AS(curriculum::evaluate_policy(oracle, grid::doorkey_descriptor({0, 0, 0}), 0, 10, 10, 1),
                  std::invalid_argument);
}
