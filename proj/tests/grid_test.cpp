#include <random>

#include "doctest.h"
#include "sebn/errors.hpp"
#include "sebn/grid/megagrid.hpp"
#include "support/grid_oracle.hpp"

using namespace sebn;
using grid::Action;
using grid::Cell;
using grid::Dir;
using grid::Item;

namespace {

// Agent with a key one step above, a wall line one step below and the goal
// four steps below.
grid::GridTask example_scene() {
  grid::GridTask t;
  t.descriptor = grid::doorkey_descriptor({0, 1, 1});
  t.agent = {5, 4};
  t.facing = Dir::kUp;
  t.key = Cell{5, 3};
  for (int x = 1; x < 10; ++x) t.walls.insert({x, 5});
  t.door = grid::Door{{0, 5}, true, false};
  t.goal = {5, 8};
  return t;
}

model::TaskDescriptor only_goal(int d, int w, int l) { return {{d, w, l}, {grid::kGoalReached}}; }

}  // namespace

TEST_CASE("sensor readings of the example scene") {
  const auto t = example_scene();
  grid::check_invariants(t);
  const auto o = grid::observe(t);
  CHECK(o.at(Item::kKey, Dir::kUp) == 0.875);
  CHECK(o.at(Item::kWall, Dir::kDown) == 0.875);
  CHECK(o.at(Item::kGoal, Dir::kDown) == 0.5);
  CHECK(o.at(Item::kGoal, Dir::kUp) == 0.0);
  CHECK(o.front_blocked);  // key in front

  grid::SensorConfig ray;
  ray.sensing = grid::Sensing::kRay;
  CHECK(grid::observe(t, ray).at(Item::kGoal, Dir::kDown) == 0.5);
  CHECK(grid::observe(t, ray).at(Item::kKey, Dir::kUp) == 0.875);
  grid::SensorConfig los;
  los.sensing = grid::Sensing::kRayLineOfSight;
  CHECK(grid::observe(t, los).at(Item::kGoal, Dir::kDown) == 0.0);
  CHECK(grid::observe(t, los).at(Item::kWall, Dir::kDown) == 0.875);
}

TEST_CASE("sensor intensity follows 1 - d/8 and vanishes with no item") {
  grid::GridTask t;
  t.width = 12;
  t.height = 1;
  t.descriptor = only_goal(1, 0, 0);
  t.agent = {0, 0};
  t.facing = Dir::kRight;
  for (int d = 1; d < 12; ++d) {
    t.goal = {d, 0};
    CHECK(grid::observe(t).at(Item::kGoal, Dir::kRight) == std::max(0.0, 1.0 - d / 8.0));
  }
  for (int dir = 0; dir < 4; ++dir) CHECK(grid::observe(t).at(Item::kWall, static_cast<Dir>(dir)) == 0.0);
}

TEST_CASE("cone sensing assigns off-axis items to the dominant axis") {
  grid::GridTask t;
  t.descriptor = only_goal(1, 0, 0);
  t.agent = {5, 5};
  struct Case {
    Cell goal;
    Dir dir;
    int d;
  };
  for (const Case& c : {Case{{6, 4}, Dir::kUp, 2}, Case{{7, 4}, Dir::kRight, 3}, Case{{3, 6}, Dir::kLeft, 3},
                        Case{{4, 9}, Dir::kDown, 5}, Case{{5, 5 - 3}, Dir::kUp, 3}}) {
    t.goal = c.goal;
    const auto o = grid::observe(t);
    for (int dir = 0; dir < 4; ++dir) {
      const double want = static_cast<Dir>(dir) == c.dir ? 1.0 - c.d / 8.0 : 0.0;
      CHECK(o.at(Item::kGoal, static_cast<Dir>(dir)) == want);
    }
  }
  grid::SensorConfig ray;
  ray.sensing = grid::Sensing::kRay;
  t.goal = {6, 4};
  for (int dir = 0; dir < 4; ++dir) CHECK(grid::observe(t, ray).at(Item::kGoal, static_cast<Dir>(dir)) == 0.0);
}

TEST_CASE("generated examples") {
  const auto easy = grid::generate_env(only_goal(0, 0, 0), 10, 10, 1);
  CHECK(easy.walls.empty());
  CHECK(!easy.door);
  CHECK(!easy.key);
  CHECK(grid::distance_to_interest(easy) <= 2);

  const auto hard = grid::generate_env(grid::doorkey_descriptor({0, 1, 1}), 10, 10, 1);
  CHECK(hard.walls.size() == 9);
  REQUIRE(hard.door);
  CHECK(hard.door->locked);
  CHECK(!hard.door->open);
  CHECK(hard.key);
  CHECK(hard.descriptor.enabled_targets.size() == 3);

  CHECK(grid::generate_env(grid::doorkey_descriptor({1, 1, 1}), 10, 10, 42) ==
        grid::generate_env(grid::doorkey_descriptor({1, 1, 1}), 10, 10, 42));
  CHECK_THROWS_AS(grid::generate_env(only_goal(1, 0, 0), 3, 3, 0), GenerationError);
  CHECK_THROWS_AS(grid::generate_env({{0, 0, 0}, {grid::kHasKey}}, 10, 10, 0), std::invalid_argument);
  CHECK_THROWS_AS(grid::generate_env({{0, 0, 0}, {}}, 10, 10, 0), std::invalid_argument);
}

TEST_CASE("1000 generated tasks per descriptor are valid and solvable") {
  for (const auto& d : grid::doorkey_task_classes()) {
    int failures = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const auto t = grid::generate_env(d, 10, 10, seed);
      try {
        grid::check_invariants(t);
      } catch (const std::exception&) {
        ++failures;
      }
      const auto reach = testing::bfs_reach(t);
      bool ok = reach.goal;
      if (d.env[2]) ok = ok && reach.key && reach.door;
      if (d.env[1] && d.env[2]) ok = ok && reach.goal_after_door;
      failures += !ok;
    }
    INFO("descriptor " << d.env[0] << d.env[1] << d.env[2]);
    CHECK(failures == 0);
  }
}

TEST_CASE("step dynamics") {
  grid::GridTask t;
  t.descriptor = only_goal(0, 0, 0);
  t.agent = {3, 3};
  t.facing = Dir::kRight;
  t.goal = {4, 3};
  auto r = grid::step(t, Action::kForward);
  CHECK(r.reward == 1.0);
  CHECK(r.terminated);
  CHECK(r.option_events == std::set<std::string>{grid::kGoalReached});
  CHECK_THROWS_AS(grid::step(t, Action::kForward), InvalidState);

  auto spin = grid::generate_env(only_goal(1, 0, 0), 10, 10, 3);
  for (int i = 0; i < 50; ++i) {
    CHECK(!spin.terminated);
    grid::step(spin, Action::kTurnLeft);
  }
  CHECK(spin.terminated);
  CHECK(spin.total_reward == 0.0);
  CHECK_THROWS_AS(grid::step(spin, Action::kTurnLeft), InvalidState);
}

TEST_CASE("key, door and goal in order") {
  auto t = example_scene();
  CHECK(grid::step(t, Action::kToggle).reward == 0.0);  // nothing to toggle
  auto r = grid::step(t, Action::kPickup);
  CHECK(r.option_events == std::set<std::string>{grid::kHasKey});
  CHECK(t.carrying_key);
  CHECK(!t.key);
  CHECK(grid::step(t, Action::kPickup).reward == 0.0);

  // Drop and pick up again pays nothing.
  CHECK(grid::step(t, Action::kDrop).reward == 0.0);
  CHECK(t.key == Cell{5, 3});
  CHECK(grid::step(t, Action::kPickup).reward == 0.0);
  CHECK(t.carrying_key);

  const auto actions = grid::plan(t);
  REQUIRE(actions);
  for (Action a : *actions) grid::step(t, a);
  CHECK(t.total_reward == 3.0);
  CHECK(t.terminated);
}

TEST_CASE("planner reaches every target on the hardest descriptor") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto t = grid::generate_env(grid::doorkey_descriptor({0, 1, 1}), 10, 10, seed);
    const auto actions = grid::plan(t);
    REQUIRE(actions);
    std::vector<std::set<std::string>> events;
    for (Action a : *actions) {
      const auto r = grid::step(t, a);
      if (!r.option_events.empty()) events.push_back(r.option_events);
    }
    CHECK(t.total_reward == 3.0);
    CHECK(events == std::vector<std::set<std::string>>{{grid::kHasKey}, {grid::kDoorOpened}, {grid::kGoalReached}});
  }
}

TEST_CASE("random play never pays more than the enabled targets") {
  std::mt19937_64 rng(9);
  for (const auto& d : grid::doorkey_task_classes()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto t = grid::generate_env(d, 10, 10, seed);
      std::vector<Action> log;
      while (!t.terminated) {
        const auto a = static_cast<Action>(rng() % grid::kNumActions);
        log.push_back(a);
        const auto r = grid::step(t, a);
        CHECK((r.reward == 0.0 || r.reward == 1.0));
        for (const auto& e : r.option_events) CHECK(t.enabled(e));
      }
      CHECK(t.total_reward <= d.enabled_targets.size());
      // Replay reproduces the trajectory.
      std::vector<Action> replayed;
      const auto doc = nlohmann::json::parse(grid::replay_to_json(grid::generate_env(d, 10, 10, seed), log).dump());
      CHECK(grid::replay_from_json(doc, &replayed) == t);
      CHECK(replayed == log);
    }
  }
}

TEST_CASE("option contexts") {
  auto t = example_scene();
  const auto key = grid::option_context(t, grid::kHasKey);
  const auto goal = grid::option_context(t, grid::kGoalReached);
  CHECK(key.initiation(t));
  CHECK(!key.termination(t));
  t.carrying_key = true;
  CHECK(key.termination(t));
  CHECK(!goal.termination(t));
  t.agent = t.goal;
  CHECK(goal.termination(t));
  const auto open = grid::generate_env(only_goal(0, 0, 0), 10, 10, 0);
  CHECK_THROWS_AS(grid::option_context(open, grid::kDoorOpened), std::invalid_argument);
}

TEST_CASE("render and larger grids") {
  const auto text = grid::render(example_scene());
  CHECK(text.find('K') != std::string::npos);
  CHECK(text.find('L') != std::string::npos);
  CHECK(text.find('A') != std::string::npos);
  CHECK(text.find('^') != std::string::npos);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto big = grid::generate_env(grid::doorkey_descriptor({1, 1, 1}), 32, 32, seed);
    grid::check_invariants(big);
    CHECK(grid::solvable(big));
  }
}
