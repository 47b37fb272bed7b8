#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "sebn/grid/megagrid.hpp"
#include "sebn/model/task.hpp"

namespace sebn::learn {

// Per item: strongest sensor direction (0 = none, 1 + Dir) and distance bucket
// 0..8; plus the agent flags.
struct DiscreteState {
  std::array<int, grid::kNumItems> direction{};
  std::array<int, grid::kNumItems> bucket{};
  bool carrying_key = false;
  bool door_open = false;
  int facing = 0;
  bool front_blocked = false;

  std::uint64_t key() const;
  bool operator==(const DiscreteState&) const = default;
};

DiscreteState discretize(const grid::Observation& obs, double range = 8.0);

// Table key of `state` for `option`: the items that option cares about, with
// directions relative to the agent's facing (0 none, 1 ahead, 2 right, 3 behind,
// 4 left) and distances coarsened to adjacent / near / far.
std::uint64_t option_key(const std::string& option, const DiscreteState& state);

// Options in execution order.
std::vector<std::string> option_order(const model::TaskDescriptor& task);

struct EpisodeResult {
  model::RolloutRecord record;
  double total_reward = 0.0;
  int steps = 0;
  bool failed = false;  // the agent threw; outcomes are all false
};

// Black-box agent contract used by the curriculum: play one episode on a task.
class GridAgent {
 public:
  virtual ~GridAgent() = default;
  virtual EpisodeResult run_episode(grid::GridTask& task, bool learn) = 0;
  virtual std::unique_ptr<GridAgent> clone() const = 0;
  virtual std::string name() const = 0;
};

struct QConfig {
  double alpha = 0.1;
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int epsilon_decay_episodes = 2000;
  std::uint64_t seed = 0;
  grid::SensorConfig sensors;
  std::vector<std::string> options = {grid::kHasKey, grid::kDoorOpened, grid::kGoalReached};
};

using QRow = std::array<double, grid::kNumActions>;
using QTable = std::unordered_map<std::uint64_t, QRow>;

class QLearner : public GridAgent {
 public:
  explicit QLearner(QConfig config = {});

  // Epsilon-greedy on the option's table; greedy ties go to the lowest action.
  grid::Action act(const grid::Observation& obs, const std::string& option, bool explore);
  // One-step backup; the bootstrap term is dropped when `terminated`.
  void update(const grid::Observation& obs, grid::Action action, double reward, const grid::Observation& next,
              bool terminated, const std::string& option);

  EpisodeResult run_episode(grid::GridTask& task, bool learn) override;
  std::unique_ptr<GridAgent> clone() const override { return std::make_unique<QLearner>(*this); }
  std::string name() const override { return "qlearner"; }

  double epsilon() const;
  int episodes() const { return episodes_; }
  const QConfig& config() const { return config_; }
  double q(const std::string& option, const DiscreteState& state, grid::Action action) const;
  const QTable& table(const std::string& option) const;
  double max_abs_q() const;

  nlohmann::json to_json() const;
  static QLearner from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static QLearner load(const std::filesystem::path& path);

  bool operator==(const QLearner& other) const;

 private:
  QTable& mutable_table(const std::string& option);

  QConfig config_;
  std::map<std::string, QTable> tables_;
  std::mt19937_64 rng_;
  int episodes_ = 0;
};

// Follows the breadth-first plan of the real task.
class OracleAgent : public GridAgent {
 public:
  EpisodeResult run_episode(grid::GridTask& task, bool learn) override;
  std::unique_ptr<GridAgent> clone() const override { return std::make_unique<OracleAgent>(*this); }
  std::string name() const override { return "oracle"; }
};

class RandomAgent : public GridAgent {
 public:
  explicit RandomAgent(std::uint64_t seed = 0) : rng_(seed) {}
  EpisodeResult run_episode(grid::GridTask& task, bool learn) override;
  std::unique_ptr<GridAgent> clone() const override { return std::make_unique<RandomAgent>(*this); }
  std::string name() const override { return "random"; }

 private:
  std::mt19937_64 rng_;
};

// Spins in place until the episode times out.
class IdleAgent : public GridAgent {
 public:
  EpisodeResult run_episode(grid::GridTask& task, bool learn) override;
  std::unique_ptr<GridAgent> clone() const override { return std::make_unique<IdleAgent>(*this); }
  std::string name() const override { return "idle"; }
};

// Outcome record of a finished (or abandoned) episode.
model::RolloutRecord outcome_record(const grid::GridTask& task);

std::unique_ptr<GridAgent> make_agent(const std::string& kind, const QConfig& config);

}  // namespace sebn::learn
