#include "sebn/curriculum/grid_runner.hpp"

#include <random>
#include <stdexcept>

namespace sebn::curriculum {

model::RolloutRecord GridRunner::run(const model::TaskDescriptor& task, std::uint64_t seed) {
  auto grid = grid::generate_env(task, width_, height_, seed);
  return agent_.run_episode(grid, true).record;
}

double evaluate_policy(const learn::GridAgent& agent, const model::TaskDescriptor& task, int episodes, int width,
                       int height, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be at least 1");
  std::mt19937_64 rng(seed);
  auto copy = agent.clone();
  int ok = 0;
  for (int e = 0; e < episodes; ++e) {
    auto grid = grid::generate_env(task, width, height, rng());
    copy->run_episode(grid, false);
    ok += grid.achieved.count(grid::kGoalReached) > 0;
  }
  return static_cast<double>(ok) / episodes;
}

}  // namespace sebn::curriculum
