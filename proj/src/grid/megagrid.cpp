#include "sebn/grid/megagrid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "sebn/errors.hpp"

namespace sebn::grid {

namespace {

constexpr std::array<const char*, kNumActions> kActionNames = {"forward", "turn_left", "turn_right",
                                                              "pickup",  "toggle",    "drop"};

int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

void validate_descriptor(const model::TaskDescriptor& d) {
  if (d.env.size() != 3) throw std::invalid_argument("DoorKey descriptors have three features (D, W, L)");
  for (int v : d.env) {
    if (v != 0 && v != 1) throw std::invalid_argument("DoorKey features are binary");
  }
  if (d.enabled_targets.empty()) throw std::invalid_argument("at least one target must be enabled");
  for (const auto& t : d.enabled_targets) {
    if (t != kHasKey && t != kDoorOpened && t != kGoalReached) throw std::invalid_argument("unknown target " + t);
    if ((t == kHasKey || t == kDoorOpened) && d.env[2] == 0) {
      throw std::invalid_argument("target " + t + " needs a locked door (L=1)");
    }
  }
}

bool matches(const GridTask& t, Item item, Cell c) {
  switch (item) {
    case Item::kKey: return t.has_key_at(c);
    case Item::kDoor: return t.door && t.door->cell == c;
    case Item::kWall: return t.is_wall(c);
    case Item::kGoal: return t.goal == c;
  }
  return false;
}

void achieve(GridTask& t, const std::string& target, std::set<std::string>& events) {
  if (t.enabled(target) && t.achieved.insert(target).second) events.insert(target);
}

}  // namespace

Cell step_towards(Cell c, Dir d) {
  switch (d) {
    case Dir::kUp: return {c.x, c.y - 1};
    case Dir::kRight: return {c.x + 1, c.y};
    case Dir::kDown: return {c.x, c.y + 1};
    case Dir::kLeft: return {c.x - 1, c.y};
  }
  return c;
}

Dir turn_left(Dir d) { return static_cast<Dir>((static_cast<int>(d) + 3) % kNumDirs); }
Dir turn_right(Dir d) { return static_cast<Dir>((static_cast<int>(d) + 1) % kNumDirs); }
char dir_glyph(Dir d) { return "^>v<"[static_cast<int>(d)]; }

std::string action_name(Action a) { return kActionNames.at(static_cast<int>(a)); }

Action parse_action(const std::string& name) {
  for (int i = 0; i < kNumActions; ++i) {
    if (name == kActionNames[i]) return static_cast<Action>(i);
  }
  throw std::invalid_argument("unknown action '" + name + "'");
}

bool GridTask::passable(Cell c) const {
  return in_bounds(c) && !is_wall(c) && !is_closed_door(c) && !has_key_at(c);
}

model::TaskDescriptor doorkey_descriptor(const std::vector<int>& env) {
  model::TaskDescriptor d{env, {kGoalReached}};
  if (env.size() == 3 && env[2] == 1) d.enabled_targets = {kHasKey, kDoorOpened, kGoalReached};
  return d;
}

std::vector<model::TaskDescriptor> doorkey_task_classes() {
  std::vector<model::TaskDescriptor> out;
  for (int d = 0; d < 2; ++d) {
    for (int w = 0; w < 2; ++w) {
      for (int l = 0; l < 2; ++l) out.push_back(doorkey_descriptor({d, w, l}));
    }
  }
  return out;
}

int distance_to_interest(const GridTask& task) {
  int best = chebyshev(task.agent, task.goal);
  if (task.key) best = std::min(best, chebyshev(task.agent, *task.key));
  return best;
}

void check_invariants(const GridTask& t) {
  validate_descriptor(t.descriptor);
  auto fail = [](const std::string& what) { throw std::invalid_argument("grid invariant: " + what); };
  std::vector<Cell> special = {t.goal};
  if (t.door) special.push_back(t.door->cell);
  if (t.key) special.push_back(*t.key);
  for (Cell c : special) {
    if (!t.in_bounds(c)) fail("special cell out of bounds");
    if (t.is_wall(c)) fail("special cell on a wall");
  }
  std::set<Cell> unique(special.begin(), special.end());
  if (unique.size() != special.size()) fail("special cells overlap");
  if (!t.in_bounds(t.agent) || unique.count(t.agent) || t.is_wall(t.agent)) fail("agent on an occupied cell");
  const bool d = t.descriptor.env[0], w = t.descriptor.env[1], l = t.descriptor.env[2];
  if (l && !(t.door && t.door->locked && t.key)) fail("locked-door task needs a locked door and a key");
  if (!l && (t.door || t.key)) fail("door or key present without L=1");
  if (w) {
    // One full row or column with exactly one gap (or door).
    bool found = false;
    for (int r = 0; r < t.height && !found; ++r) {
      int count = 0;
      for (int x = 0; x < t.width; ++x) count += t.is_wall({x, r});
      found = count == t.width - 1 && static_cast<int>(t.walls.size()) == count;
    }
    for (int c = 0; c < t.width && !found; ++c) {
      int count = 0;
      for (int y = 0; y < t.height; ++y) count += t.is_wall({c, y});
      found = count == t.height - 1 && static_cast<int>(t.walls.size()) == count;
    }
    if (!found) fail("W=1 needs a wall line with exactly one gap");
  } else if (!t.walls.empty()) {
    fail("walls present without W=1");
  }
  const int dist = distance_to_interest(t);
  if (!d && dist > 2) fail("D=0 start is farther than 2 from every point of interest");
  if (d && dist <= 2) fail("D=1 start is within 2 of a point of interest");
}

GridTask generate_env(const model::TaskDescriptor& descriptor, int width, int height, std::uint64_t seed) {
  validate_descriptor(descriptor);
  if (width < 3 || height < 3) throw GenerationError("grid must be at least 3x3");
  const bool d = descriptor.env[0], w = descriptor.env[1], l = descriptor.env[2];
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    GridTask t;
    t.width = width;
    t.height = height;
    t.descriptor = descriptor;
    t.seed = seed;
    std::set<Cell> used;
    auto free_cell = [&]() -> std::optional<Cell> {
      for (int tries = 0; tries < 1000; ++tries) {
        const Cell c{uniform(0, width - 1), uniform(0, height - 1)};
        if (!t.is_wall(c) && !used.count(c)) {
          used.insert(c);
          return c;
        }
      }
      return std::nullopt;
    };

    bool horizontal = false;
    int line = 0;
    std::optional<Cell> gap;
    if (w) {
      horizontal = uniform(0, 1) == 1;
      line = horizontal ? uniform(1, height - 2) : uniform(1, width - 2);
      const int along = horizontal ? uniform(0, width - 1) : uniform(0, height - 1);
      gap = horizontal ? Cell{along, line} : Cell{line, along};
      const int n = horizontal ? width : height;
      for (int k = 0; k < n; ++k) {
        const Cell c = horizontal ? Cell{k, line} : Cell{line, k};
        if (c != *gap) t.walls.insert(c);
      }
    }
    auto side = [&](Cell c) {
      const int v = horizontal ? c.y : c.x;
      return (v > line) - (v < line);
    };

    if (l) {
      if (gap) {
        t.door = Door{*gap, true, false};
        used.insert(*gap);
      } else if (auto c = free_cell()) {
        t.door = Door{*c, true, false};
      } else {
        continue;
      }
      auto k = free_cell();
      if (!k) continue;
      t.key = *k;
    } else if (gap) {
      used.insert(*gap);  // keep the passage clear
    }
    auto g = free_cell();
    auto a = free_cell();
    if (!g || !a) continue;
    t.goal = *g;
    t.agent = *a;
    t.facing = static_cast<Dir>(uniform(0, kNumDirs - 1));

    if (w) {
      if (side(t.agent) == 0 || side(t.goal) == 0 || side(t.agent) == side(t.goal)) continue;
      if (t.key && side(*t.key) != side(t.agent)) continue;
    }
    const int dist = distance_to_interest(t);
    if ((!d && dist > 2) || (d && dist <= 2)) continue;
    if (!solvable(t)) continue;
    return t;
  }
  throw GenerationError("could not place a " + std::to_string(width) + "x" + std::to_string(height) +
                        " layout satisfying the descriptor");
}

Sensing parse_sensing(const std::string& name) {
  if (name == "cone") return Sensing::kCone;
  if (name == "ray") return Sensing::kRay;
  if (name == "ray-los") return Sensing::kRayLineOfSight;
  throw std::invalid_argument("unknown sensing mode '" + name + "'");
}

std::string sensing_name(Sensing sensing) {
  switch (sensing) {
    case Sensing::kCone: return "cone";
    case Sensing::kRay: return "ray";
    case Sensing::kRayLineOfSight: return "ray-los";
  }
  return "?";
}

Observation observe(const GridTask& t, const SensorConfig& config) {
  Observation o;
  auto reading = [&](int d) { return std::max(0.0, 1.0 - d / config.range); };
  if (config.sensing == Sensing::kCone) {
    std::array<std::array<int, kNumDirs>, kNumItems> nearest;
    for (auto& row : nearest) row.fill(-1);
    auto see = [&](Item item, Cell c) {
      const int dx = c.x - t.agent.x, dy = c.y - t.agent.y;
      if (dx == 0 && dy == 0) return;
      Dir dir;
      if (std::abs(dy) >= std::abs(dx)) {
        dir = dy < 0 ? Dir::kUp : Dir::kDown;
      } else {
        dir = dx > 0 ? Dir::kRight : Dir::kLeft;
      }
      int& best = nearest[static_cast<int>(item)][static_cast<int>(dir)];
      const int d = std::abs(dx) + std::abs(dy);
      if (best < 0 || d < best) best = d;
    };
    if (t.key) see(Item::kKey, *t.key);
    if (t.door) see(Item::kDoor, t.door->cell);
    for (Cell c : t.walls) see(Item::kWall, c);
    see(Item::kGoal, t.goal);
    for (int item = 0; item < kNumItems; ++item) {
      for (int dir = 0; dir < kNumDirs; ++dir) {
        if (nearest[item][dir] > 0) o.intensity[item][dir] = reading(nearest[item][dir]);
      }
    }
  } else {
    for (int item = 0; item < kNumItems; ++item) {
      for (int dir = 0; dir < kNumDirs; ++dir) {
        Cell c = t.agent;
        for (int k = 1;; ++k) {
          c = step_towards(c, static_cast<Dir>(dir));
          if (!t.in_bounds(c)) break;
          if (matches(t, static_cast<Item>(item), c)) {
            o.intensity[item][dir] = reading(k);
            break;
          }
          if (config.sensing == Sensing::kRayLineOfSight && (t.is_wall(c) || t.is_closed_door(c))) break;
        }
      }
    }
  }
  o.carrying_key = t.carrying_key;
  o.door_open = t.door && t.door->open;
  o.facing = t.facing;
  o.front_blocked = !t.passable(step_towards(t.agent, t.facing));
  return o;
}

StepResult step(GridTask& t, Action action, const SensorConfig& config) {
  if (t.terminated) throw InvalidState("episode already terminated");
  StepResult r;
  const Cell front = step_towards(t.agent, t.facing);
  switch (action) {
    case Action::kForward:
      if (t.passable(front)) {
        t.agent = front;
        if (t.agent == t.goal) {
          achieve(t, kGoalReached, r.option_events);
          t.terminated = true;
        }
      }
      break;
    case Action::kTurnLeft: t.facing = turn_left(t.facing); break;
    case Action::kTurnRight: t.facing = turn_right(t.facing); break;
    case Action::kPickup:
      if (!t.carrying_key && t.has_key_at(front)) {
        t.key.reset();
        t.carrying_key = true;
        achieve(t, kHasKey, r.option_events);
      }
      break;
    case Action::kToggle:
      if (t.is_closed_door(front) && t.carrying_key) {
        t.door->open = true;
        achieve(t, kDoorOpened, r.option_events);
      }
      break;
    case Action::kDrop:
      if (t.carrying_key && t.passable(front) && front != t.goal) {
        t.key = front;
        t.carrying_key = false;
      }
      break;
  }
  ++t.steps;
  t.steps_since_progress = r.option_events.empty() ? t.steps_since_progress + 1 : 0;
  if (t.steps_since_progress >= kNoProgressLimit) t.terminated = true;
  r.reward = static_cast<double>(r.option_events.size());
  t.total_reward += r.reward;
  r.terminated = t.terminated;
  r.observation = observe(t, config);
  return r;
}

OptionContext option_context(const GridTask& task, const std::string& target) {
  if (!task.enabled(target)) throw std::invalid_argument("target " + target + " is not enabled");
  OptionContext ctx;
  ctx.initiation = [](const GridTask&) { return true; };
  if (target == kHasKey) {
    ctx.termination = [](const GridTask& t) { return t.carrying_key; };
  } else if (target == kDoorOpened) {
    if (!task.door) throw std::invalid_argument("task has no door");
    ctx.termination = [](const GridTask& t) { return t.door && t.door->open; };
  } else if (target == kGoalReached) {
    ctx.termination = [](const GridTask& t) { return t.agent == t.goal; };
  } else {
    throw std::invalid_argument("unknown target " + target);
  }
  return ctx;
}

std::optional<std::vector<Action>> plan(const GridTask& start) {
  // Packed state: cell, facing, carrying, door open, achieved targets. Drop
  // is never needed and is left out.
  const std::array<std::string, 3> order = {kHasKey, kDoorOpened, kGoalReached};
  int want = 0, have = 0;
  for (int k = 0; k < 3; ++k) {
    if (start.enabled(order[k])) want |= 1 << k;
    if (start.achieved.count(order[k])) have |= 1 << k;
  }
  if ((have & want) == want) return std::vector<Action>{};
  const int w = start.width, h = start.height;
  std::vector<char> wall(static_cast<std::size_t>(w) * h, 0);
  for (Cell c : start.walls) wall[c.y * w + c.x] = 1;
  auto encode = [&](Cell c, int f, bool carry, bool open, int mask) {
    return ((((c.y * w + c.x) * 4 + f) * 2 + carry) * 2 + open) * 8 + mask;
  };
  const std::size_t n = static_cast<std::size_t>(w) * h * 4 * 2 * 2 * 8;
  std::vector<int> parent(n, -1);
  std::vector<char> via(n, 0);
  const bool key_exists = start.key.has_value();
  auto gain = [&](int mask, int k) { return (want >> k & 1) ? mask | (1 << k) : mask; };

  struct S {
    Cell c;
    int f;
    bool carry, open;
    int mask;
  };
  const S s0{start.agent, static_cast<int>(start.facing), start.carrying_key, start.door && start.door->open, have};
  const int root = encode(s0.c, s0.f, s0.carry, s0.open, s0.mask);
  parent[root] = root;
  std::deque<S> queue{s0};
  while (!queue.empty()) {
    const S cur = queue.front();
    queue.pop_front();
    const int ck = encode(cur.c, cur.f, cur.carry, cur.open, cur.mask);
    const Cell front = step_towards(cur.c, static_cast<Dir>(cur.f));
    const bool in = front.x >= 0 && front.y >= 0 && front.x < w && front.y < h;
    const bool is_door = in && start.door && start.door->cell == front;
    const bool key_here = in && key_exists && !cur.carry && *start.key == front;
    for (int a = 0; a < kNumActions; ++a) {
      S next = cur;
      bool terminal = false;
      switch (static_cast<Action>(a)) {
        case Action::kForward:
          if (!in || wall[front.y * w + front.x] || (is_door && !cur.open) || key_here) continue;
          next.c = front;
          if (front == start.goal) {
            next.mask = gain(next.mask, 2);
            terminal = true;
          }
          break;
        case Action::kTurnLeft: next.f = (cur.f + 3) % 4; break;
        case Action::kTurnRight: next.f = (cur.f + 1) % 4; break;
        case Action::kPickup:
          if (!key_here) continue;
          next.carry = true;
          next.mask = gain(next.mask, 0);
          break;
        case Action::kToggle:
          if (!is_door || cur.open || !cur.carry) continue;
          next.open = true;
          next.mask = gain(next.mask, 1);
          break;
        case Action::kDrop: continue;
      }
      const int nk = encode(next.c, next.f, next.carry, next.open, next.mask);
      if (parent[nk] != -1) continue;
      parent[nk] = ck;
      via[nk] = static_cast<char>(a);
      if ((next.mask & want) == want) {
        std::vector<Action> actions;
        for (int k = nk; k != root; k = parent[k]) actions.push_back(static_cast<Action>(via[k]));
        std::reverse(actions.begin(), actions.end());
        return actions;
      }
      if (!terminal) queue.push_back(next);
    }
  }
  return std::nullopt;
}

bool solvable(const GridTask& task) {
  const auto actions = plan(task);
  if (!actions) return false;
  // The plan must also respect the no-progress limit.
  GridTask t = task;
  for (Action a : *actions) {
    if (t.terminated) return false;
    step(t, a);
  }
  for (const auto& target : task.descriptor.enabled_targets) {
    if (!t.achieved.count(target)) return false;
  }
  return true;
}

std::string render(const GridTask& t) {
  std::ostringstream out;
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      const Cell c{x, y};
      char g = '.';
      if (t.is_wall(c)) g = '#';
      if (t.door && t.door->cell == c) g = t.door->open ? '/' : 'L';
      if (t.has_key_at(c)) g = 'K';
      if (t.goal == c) g = 'A';
      if (t.agent == c) g = dir_glyph(t.facing);
      out << g;
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json replay_to_json(const GridTask& start, const std::vector<Action>& actions) {
  nlohmann::json names = nlohmann::json::array();
  for (Action a : actions) names.push_back(action_name(a));
  return {{"seed", start.seed},
          {"width", start.width},
          {"height", start.height},
          {"env", start.descriptor.env},
          {"targets", start.descriptor.enabled_targets},
          {"actions", names}};
}

GridTask replay_from_json(const nlohmann::json& doc, std::vector<Action>* actions) {
  try {
    const model::TaskDescriptor d{doc.at("env").get<std::vector<int>>(),
                                  doc.at("targets").get<std::vector<std::string>>()};
    GridTask t = generate_env(d, doc.at("width").get<int>(), doc.at("height").get<int>(),
                              doc.at("seed").get<std::uint64_t>());
    for (const auto& name : doc.at("actions")) {
      const Action a = parse_action(name.get<std::string>());
      if (actions) actions->push_back(a);
      step(t, a);
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("malformed replay log: ") + e.what());
  }
}

}  // namespace sebn::grid
