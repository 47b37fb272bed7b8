#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "sebn/model/task.hpp"

namespace sebn::grid {

inline const std::string kHasKey = "haskey";
inline const std::string kDoorOpened = "dooropened";
inline const std::string kGoalReached = "goalreached";

struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

enum class Dir { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };
inline constexpr int kNumDirs = 4;
Cell step_towards(Cell c, Dir d);
Dir turn_left(Dir d);
Dir turn_right(Dir d);
char dir_glyph(Dir d);

enum class Action { kForward = 0, kTurnLeft, kTurnRight, kPickup, kToggle, kDrop };
inline constexpr int kNumActions = 6;
std::string action_name(Action a);
Action parse_action(const std::string& name);

enum class Item { kKey = 0, kDoor = 1, kWall = 2, kGoal = 3 };
inline constexpr int kNumItems = 4;

// kCone: an item lies in the direction whose axis dominates its offset
// (vertical on diagonals), at Manhattan distance, seen through walls.
// kRay: only items on the straight ray. kRayLineOfSight: the ray stops at walls
// and closed doors.
enum class Sensing { kCone, kRay, kRayLineOfSight };
Sensing parse_sensing(const std::string& name);
std::string sensing_name(Sensing sensing);

struct SensorConfig {
  Sensing sensing = Sensing::kCone;
  double range = 8.0;  // intensity = max(0, 1 - d / range)
};

struct Door {
  Cell cell;
  bool locked = true;
  bool open = false;
  bool operator==(const Door&) const = default;
};

// Layout plus episode state.
struct GridTask {
  int width = 10;
  int height = 10;
  Cell agent;
  Dir facing = Dir::kUp;
  Cell goal;
  std::set<Cell> walls;
  std::optional<Door> door;
  std::optional<Cell> key;  // on the floor; empty once picked up
  bool carrying_key = false;
  model::TaskDescriptor descriptor;  // env = {D, W, L}
  std::uint64_t seed = 0;

  std::set<std::string> achieved;
  int steps = 0;
  int steps_since_progress = 0;
  double total_reward = 0.0;
  bool terminated = false;

  bool operator==(const GridTask&) const = default;

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  bool is_wall(Cell c) const { return walls.count(c) > 0; }
  bool is_closed_door(Cell c) const { return door && door->cell == c && !door->open; }
  bool has_key_at(Cell c) const { return key && *key == c; }
  bool passable(Cell c) const;
  bool enabled(const std::string& target) const { return descriptor.enables(target); }
};

struct Observation {
  std::array<std::array<double, kNumDirs>, kNumItems> intensity{};
  bool carrying_key = false;
  bool door_open = false;
  Dir facing = Dir::kUp;
  bool front_blocked = false;

  double at(Item item, Dir dir) const { return intensity[static_cast<int>(item)][static_cast<int>(dir)]; }
  bool operator==(const Observation&) const = default;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;
  std::set<std::string> option_events;
};

inline constexpr int kNoProgressLimit = 50;
inline constexpr int kMaxGenerationAttempts = 20000;

// DoorKey task class for features {D, W, L}: a locked door brings the key and
// door targets with it.
model::TaskDescriptor doorkey_descriptor(const std::vector<int>& env);
std::vector<model::TaskDescriptor> doorkey_task_classes();

GridTask generate_env(const model::TaskDescriptor& descriptor, int width, int height, std::uint64_t seed);

// Throws std::invalid_argument naming the first broken invariant.
void check_invariants(const GridTask& task);

Observation observe(const GridTask& task, const SensorConfig& config = {});
StepResult step(GridTask& task, Action action, const SensorConfig& config = {});

struct OptionContext {
  std::function<bool(const GridTask&)> initiation;
  std::function<bool(const GridTask&)> termination;
};
OptionContext option_context(const GridTask& task, const std::string& target);

// Minimum Chebyshev distance from the agent to the key or goal.
int distance_to_interest(const GridTask& task);

// Shortest action sequence achieving every enabled target in key -> door ->
// goal order, by breadth-first search over (cell, facing, carrying, door open).
// Empty when no such plan exists.
std::optional<std::vector<Action>> plan(const GridTask& task);
bool solvable(const GridTask& task);

std::string render(const GridTask& task);

// Replay log line: {"seed", "width", "height", "env", "targets", "actions"}.
nlohmann::json replay_to_json(const GridTask& start, const std::vector<Action>& actions);
// Regenerates the start state from the seed and replays the actions.
GridTask replay_from_json(const nlohmann::json& doc, std::vector<Action>* actions = nullptr);

}  // namespace sebn::grid
