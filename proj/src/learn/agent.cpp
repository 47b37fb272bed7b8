#include "sebn/learn/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sebn/errors.hpp"

namespace sebn::learn {

namespace {

constexpr int kFormatVersion = 1;

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw std::invalid_argument(std::string("non-finite ") + what);
}

}  // namespace

std::uint64_t DiscreteState::key() const {
  std::uint64_t k = 0;
  for (int i = 0; i < grid::kNumItems; ++i) k = (k << 7) | (direction[i] << 4) | bucket[i];
  k = (k << 1) | carrying_key;
  k = (k << 1) | door_open;
  k = (k << 2) | facing;
  k = (k << 1) | front_blocked;
  return k;
}

std::uint64_t option_key(const std::string& option, const DiscreteState& s) {
  std::uint64_t k = 0;
  auto push = [&k](int value, int radix) { k = k * radix + value; };
  auto relative = [&](int i) { return (s.direction[i] - 1 - s.facing + grid::kNumDirs) % grid::kNumDirs; };
  // The option's own item keeps its full distance bucket; others are coarse.
  auto fine = [&](grid::Item it) {
    const int i = static_cast<int>(it);
    push(s.direction[i] == 0 ? 0 : 1 + relative(i) * 9 + s.bucket[i], 37);
  };
  auto coarse = [&](grid::Item it) {
    const int i = static_cast<int>(it);
    if (s.direction[i] == 0) {
      push(0, 13);
      return;
    }
    const int dist = s.bucket[i] <= 1 ? 0 : s.bucket[i] <= 3 ? 1 : 2;
    push(1 + relative(i) * 3 + dist, 13);
  };
  if (option == grid::kHasKey) {
    fine(grid::Item::kKey);
    coarse(grid::Item::kWall);
  } else if (option == grid::kDoorOpened) {
    fine(grid::Item::kDoor);
    coarse(grid::Item::kWall);
    push(s.carrying_key, 2);
  } else {
    fine(grid::Item::kGoal);
    coarse(grid::Item::kDoor);
    coarse(grid::Item::kWall);
    push(s.door_open, 2);
  }
  push(s.front_blocked, 2);
  return k;
}

DiscreteState discretize(const grid::Observation& obs, double range) {
  DiscreteState s;
  for (int i = 0; i < grid::kNumItems; ++i) {
    int best = -1;
    for (int d = 0; d < grid::kNumDirs; ++d) {
      if (obs.intensity[i][d] > 0.0 && (best < 0 || obs.intensity[i][d] > obs.intensity[i][best])) best = d;
    }
    if (best < 0) continue;
    s.direction[i] = best + 1;
    s.bucket[i] = std::clamp(static_cast<int>(std::lround((1.0 - obs.intensity[i][best]) * range)), 0, 8);
  }
  s.carrying_key = obs.carrying_key;
  s.door_open = obs.door_open;
  s.facing = static_cast<int>(obs.facing);
  s.front_blocked = obs.front_blocked;
  return s;
}

std::vector<std::string> option_order(const model::TaskDescriptor& task) {
  std::vector<std::string> out;
  for (const auto& t : {grid::kHasKey, grid::kDoorOpened, grid::kGoalReached}) {
    if (task.enables(t)) out.push_back(t);
  }
  return out;
}

model::RolloutRecord outcome_record(const grid::GridTask& task) {
  model::RolloutRecord r;
  r.task = task.descriptor;
  for (const auto& t : task.descriptor.enabled_targets) r.outcomes[t] = task.achieved.count(t) > 0;
  return r;
}

QLearner::QLearner(QConfig config) : config_(std::move(config)), rng_(config_.seed) {
  if (!(config_.alpha > 0.0 && config_.alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
  if (!(config_.gamma > 0.0 && config_.gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  for (double e : {config_.epsilon_start, config_.epsilon_end}) {
    if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("epsilon must be in [0, 1]");
  }
  if (config_.epsilon_decay_episodes < 0) throw std::invalid_argument("negative epsilon decay");
  for (const auto& o : config_.options) tables_[o];
}

double QLearner::epsilon() const {
  if (config_.epsilon_decay_episodes == 0 || episodes_ >= config_.epsilon_decay_episodes) return config_.epsilon_end;
  const double frac = static_cast<double>(episodes_) / config_.epsilon_decay_episodes;
  return config_.epsilon_start + (config_.epsilon_end - config_.epsilon_start) * frac;
}

const QTable& QLearner::table(const std::string& option) const {
  auto it = tables_.find(option);
  if (it == tables_.end()) throw std::invalid_argument("no value table for option " + option);
  return it->second;
}

QTable& QLearner::mutable_table(const std::string& option) {
  auto it = tables_.find(option);
  if (it == tables_.end()) throw std::invalid_argument("no value table for option " + option);
  return it->second;
}

double QLearner::q(const std::string& option, const DiscreteState& state, grid::Action action) const {
  const auto& t = table(option);
  auto it = t.find(option_key(option, state));
  return it == t.end() ? 0.0 : it->second[static_cast<int>(action)];
}

double QLearner::max_abs_q() const {
  double m = 0.0;
  for (const auto& [o, t] : tables_) {
    for (const auto& [k, row] : t) {
      for (double v : row) m = std::max(m, std::abs(v));
    }
  }
  return m;
}

grid::Action QLearner::act(const grid::Observation& obs, const std::string& option, bool explore) {
  const auto& t = table(option);
  if (explore && std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < epsilon()) {
    return static_cast<grid::Action>(std::uniform_int_distribution<int>(0, grid::kNumActions - 1)(rng_));
  }
  auto it = t.find(option_key(option, discretize(obs, config_.sensors.range)));
  if (it == t.end()) return static_cast<grid::Action>(0);
  const auto& row = it->second;
  return static_cast<grid::Action>(std::max_element(row.begin(), row.end()) - row.begin());
}

void QLearner::update(const grid::Observation& obs, grid::Action action, double reward,
                      const grid::Observation& next, bool terminated, const std::string& option) {
  require_finite(reward, "reward");
  for (const auto* o : {&obs, &next}) {
    for (const auto& row : o->intensity) {
      for (double v : row) require_finite(v, "observation");
    }
  }
  auto& t = mutable_table(option);
  double target = reward;
  if (!terminated) {
    auto it = t.find(option_key(option, discretize(next, config_.sensors.range)));
    if (it != t.end()) target += config_.gamma * *std::max_element(it->second.begin(), it->second.end());
  }
  double& q = t[option_key(option, discretize(obs, config_.sensors.range))][static_cast<int>(action)];
  q += config_.alpha * (target - q);
}

EpisodeResult QLearner::run_episode(grid::GridTask& task, bool learn) {
  const auto options = option_order(task.descriptor);
  std::vector<grid::OptionContext> contexts;
  for (const auto& o : options) contexts.push_back(grid::option_context(task, o));
  std::size_t active = 0;
  EpisodeResult result;
  grid::Observation obs = grid::observe(task, config_.sensors);
  while (!task.terminated && active < options.size()) {
    const std::string& option = options[active];
    const grid::Action a = act(obs, option, learn);
    const grid::StepResult r = grid::step(task, a, config_.sensors);
    const bool done = contexts[active].termination(task);
    if (learn) {
      const bool ended_elsewhere = task.terminated && task.steps_since_progress < grid::kNoProgressLimit;
      update(obs, a, done ? 1.0 : 0.0, r.observation, done || ended_elsewhere, option);
    }
    obs = r.observation;
    if (done) ++active;
  }
  if (learn) ++episodes_;
  result.record = outcome_record(task);
  result.total_reward = task.total_reward;
  result.steps = task.steps;
  return result;
}

nlohmann::json QLearner::to_json() const {
  nlohmann::json tables = nlohmann::json::object();
  for (const auto& [option, t] : tables_) {
    std::vector<std::pair<std::uint64_t, QRow>> rows(t.begin(), t.end());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [k, row] : rows) list.push_back({k, row});
    tables[option] = list;
  }
  std::ostringstream rng;
  rng << rng_;
  return {{"format", "sebn-qtable"},
          {"version", kFormatVersion},
          {"alpha", config_.alpha},
          {"gamma", config_.gamma},
          {"epsilon_start", config_.epsilon_start},
          {"epsilon_end", config_.epsilon_end},
          {"epsilon_decay_episodes", config_.epsilon_decay_episodes},
          {"seed", config_.seed},
          {"sensing", static_cast<int>(config_.sensors.sensing)},
          {"range", config_.sensors.range},
          {"options", config_.options},
          {"episodes", episodes_},
          {"rng", rng.str()},
          {"tables", tables}};
}

QLearner QLearner::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "sebn-qtable") throw ConfigurationError("not a value-table checkpoint");
    if (doc.at("version").get<int>() != kFormatVersion) throw ConfigurationError("unsupported checkpoint version");
    QConfig c;
    c.alpha = doc.at("alpha");
    c.gamma = doc.at("gamma");
    c.epsilon_start = doc.at("epsilon_start");
    c.epsilon_end = doc.at("epsilon_end");
    c.epsilon_decay_episodes = doc.at("epsilon_decay_episodes");
    c.seed = doc.at("seed");
    c.sensors.sensing = static_cast<grid::Sensing>(doc.at("sensing").get<int>());
    c.sensors.range = doc.at("range");
    c.options = doc.at("options").get<std::vector<std::string>>();
    QLearner q(c);
    q.episodes_ = doc.at("episodes");
    std::istringstream rng(doc.at("rng").get<std::string>());
    rng >> q.rng_;
    for (const auto& [option, list] : doc.at("tables").items()) {
      auto& t = q.mutable_table(option);
      for (const auto& entry : list) t[entry.at(0).get<std::uint64_t>()] = entry.at(1).get<QRow>();
    }
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void QLearner::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigurationError("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

QLearner QLearner::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read " + path.string());
  return from_json(nlohmann::json::parse(in));
}

bool QLearner::operator==(const QLearner& other) const {
  return to_json() == other.to_json();
}

EpisodeResult OracleAgent::run_episode(grid::GridTask& task, bool) {
  if (const auto actions = grid::plan(task)) {
    for (grid::Action a : *actions) {
      if (task.terminated) break;
      grid::step(task, a);
    }
  }
  while (!task.terminated) grid::step(task, grid::Action::kTurnLeft);
  return {outcome_record(task), task.total_reward, task.steps, false};
}

EpisodeResult RandomAgent::run_episode(grid::GridTask& task, bool) {
  std::uniform_int_distribution<int> pick(0, grid::kNumActions - 1);
  while (!task.terminated) grid::step(task, static_cast<grid::Action>(pick(rng_)));
  return {outcome_record(task), task.total_reward, task.steps, false};
}

EpisodeResult IdleAgent::run_episode(grid::GridTask& task, bool) {
  while (!task.terminated) grid::step(task, grid::Action::kTurnLeft);
  return {outcome_record(task), task.total_reward, task.steps, false};
}

std::unique_ptr<GridAgent> make_agent(const std::string& kind, const QConfig& config) {
  if (kind == "qlearner") return std::make_unique<QLearner>(config);
  if (kind == "oracle") return std::make_unique<OracleAgent>();
  if (kind == "random") return std::make_unique<RandomAgent>(config.seed);
  if (kind == "idle") return std::make_unique<IdleAgent>();
  throw std::invalid_argument("unknown agent kind '" + kind + "'");
}

}  // namespace sebn::learn
