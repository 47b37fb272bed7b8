#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sebn/estimate/em.hpp"
#include "sebn/model/sebn.hpp"
#include "sebn/search/candidates.hpp"

namespace sebn::curriculum {

enum class InitMode { kUniform, kEasyBiased };
enum class Variant { kSebn, kUniform, kAnti, kNone };
// Anti-curriculum fitness: 1 - d^2 (default) or (1 - |d|)^2.
enum class AntiFitness { kOneMinusSquared, kSquaredComplement };

Variant parse_variant(const std::string& text);
std::string variant_name(Variant variant);
InitMode parse_init_mode(const std::string& text);

inline constexpr double kFitnessFloor = 1e-12;

struct TaskDistribution {
  std::vector<model::TaskDescriptor> support;
  std::vector<double> weights;
  int generation = 0;

  // 0 for tasks outside the support.
  double weight_of(const model::TaskDescriptor& task) const;
  // Throws std::invalid_argument on a broken invariant.
  void validate() const;
  double expected_difficulty() const;
};

TaskDistribution init_distribution(const std::vector<model::TaskDescriptor>& tasks, InitMode mode);

double fitness(double prev_pred, double curr_pred);
double anti_fitness(double prev_pred, double curr_pred, AntiFitness form = AntiFitness::kOneMinusSquared);

struct TaskStats {
  model::TaskDescriptor task;
  double pred_prev = 0.0;
  double pred_curr = 0.0;
  double fitness = 0.0;
  double weight_before = 0.0;
  double weight_after = 0.0;
  int rollouts = 0;
  int successes = 0;  // terminal target achieved
};

struct GenerationStats {
  int generation = 0;
  std::vector<TaskStats> tasks;
  // target -> (successes, trials) over this generation's rollouts
  std::map<std::string, std::pair<int, int>> target_counts;
  model::Phi phi;
  double log_likelihood = 0.0;
  bool fallback_uniform = false;
  bool used_search = false;
  int learner_failures = 0;
  std::optional<search::CandidateSet> candidates;
};

// P_{t+1}(m) = 0.5 F(m)/sum F + 0.5 P_t(m) over the tasks in `stats`, which
// must cover the support; tasks new to the support start from weight 0. The
// fitness term is uniform when sum F < 1e-12.
TaskDistribution update_distribution(const TaskDistribution& dist, const GenerationStats& stats);

// Runs one training episode on a fresh instance of a task.
class EpisodeRunner {
 public:
  virtual ~EpisodeRunner() = default;
  virtual model::RolloutRecord run(const model::TaskDescriptor& task, std::uint64_t seed) = 0;
};

// Outcomes drawn from a hidden SEBN.
class SyntheticRunner : public EpisodeRunner {
 public:
  SyntheticRunner(const model::SebnSpec& spec, const model::Phi& truth);
  model::RolloutRecord run(const model::TaskDescriptor& task, std::uint64_t seed) override;

 private:
  bayes::Network network_;
};

struct CurriculumConfig {
  Variant variant = Variant::kSebn;
  int generation_size = 32;
  InitMode init = InitMode::kUniform;
  std::uint64_t seed = 0;
  estimate::EmConfig em;
  // Weight of rollouts from k generations back is decay^k; 0 keeps only the current generation.
  double history_decay = 0.0;
  int candidates = 20;
  int expansions = 64;
  int ibound = 20;
  std::size_t exhaustive_threshold = search::kDefaultExhaustiveThreshold;
  AntiFitness anti_form = AntiFitness::kOneMinusSquared;
  // Training task of the "none" variant.
  std::optional<model::TaskDescriptor> eval_task;
  // Maps a candidate environment to a task; enables every target when unset.
  std::function<model::TaskDescriptor(const std::vector<int>&)> task_for_env;
};

class Curriculum {
 public:
  // With an empty `support`, the whole environment space is used when it fits
  // the exhaustive threshold, otherwise `candidates` configurations drawn
  // uniformly.
  Curriculum(model::SebnSpec spec, CurriculumConfig config, std::vector<model::TaskDescriptor> support = {});

  const GenerationStats& run_generation(EpisodeRunner& runner);

  const model::SebnSpec& spec() const { return spec_; }
  const CurriculumConfig& config() const { return config_; }
  const TaskDistribution& distribution() const { return dist_; }
  const model::Phi& phi() const { return phi_; }
  const std::vector<GenerationStats>& history() const { return history_; }
  const std::vector<model::RolloutRecord>& rollouts() const { return rollouts_; }
  int learner_failures() const { return learner_failures_; }
  model::TaskDescriptor task_for_env(const std::vector<int>& env) const;

 private:
  std::vector<model::TaskDescriptor> sample_tasks();
  std::vector<model::TaskDescriptor> evaluation_set(const bayes::Network& prev, const bayes::Network& next,
                                                    GenerationStats& stats);

  model::SebnSpec spec_;
  CurriculumConfig config_;
  TaskDistribution dist_;
  model::Phi phi_;
  std::vector<GenerationStats> history_;
  std::vector<model::RolloutRecord> rollouts_;
  std::mt19937_64 rng_;
  int learner_failures_ = 0;
};

// generation,task,weight_before,weight,fitness,pred_prev,pred_curr,rollouts,successes,realized
void write_history_header(std::ostream& out);
void write_history_rows(std::ostream& out, const model::SebnSpec& spec, const GenerationStats& stats);

}  // namespace sebn::curriculum
