#pragma once

#include <cstdint>

#include "sebn/curriculum/curriculum.hpp"
#include "sebn/learn/agent.hpp"

namespace sebn::curriculum {

// Trains `agent` for one episode on a freshly generated grid.
class GridRunner : public EpisodeRunner {
 public:
  GridRunner(learn::GridAgent& agent, int width = 10, int height = 10) : agent_(agent), width_(width), height_(height) {}
  model::RolloutRecord run(const model::TaskDescriptor& task, std::uint64_t seed) override;

 private:
  learn::GridAgent& agent_;
  int width_;
  int height_;
};

// Fraction of greedy episodes, each on a fresh instance of `task`, that reach
// the terminal target. The agent itself is left untouched.
double evaluate_policy(const learn::GridAgent& agent, const model::TaskDescriptor& task, int episodes, int width,
                       int height, std::uint64_t seed);

}  // namespace sebn::curriculum
