#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sebn/curriculum/curriculum.hpp"
#include "sebn/learn/agent.hpp"

namespace sebn::harness {

// "doorkey" trains the tabular learner on Megagrid; "synthetic" draws outcomes
// from the spec's SEBN with a hidden phi.
enum class Domain { kDoorKey, kSynthetic };

struct ExperimentConfig {
  std::filesystem::path spec;
  Domain domain = Domain::kDoorKey;
  curriculum::Variant variant = curriculum::Variant::kSebn;
  int generations = 100;
  int generation_size = 32;
  std::vector<std::uint64_t> seeds = {0};
  int eval_interval = 1;
  int eval_episodes = 100;
  std::vector<int> eval_env = {0, 1, 1};
  int grid_size = 10;
  int generalization_size = 32;
  double success_threshold = 0.8;
  std::filesystem::path output = "out";
  int jobs = 0;  // 0 = one per hardware thread
  curriculum::InitMode init = curriculum::InitMode::kUniform;
  curriculum::AntiFitness anti_form = curriculum::AntiFitness::kOneMinusSquared;
  double history_decay = 0.0;
  estimate::EmConfig em;
  int candidates = 20;
  int expansions = 64;
  int ibound = 20;
  std::size_t exhaustive_threshold = search::kDefaultExhaustiveThreshold;
  learn::QConfig learner;
  // Hidden phi of the synthetic domain; the spec's phi when empty.
  std::optional<model::Phi> synthetic_truth;

  void validate() const;
};

// Every field is optional; relative spec paths resolve against `base`.
ExperimentConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

Domain parse_domain(const std::string& text);
std::string domain_name(Domain domain);

struct Checkpoint {
  int generation = 0;  // generations completed
  double success = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<Checkpoint> checkpoints;
  // First checkpoint at or above the threshold; generations + 1 when never.
  int generations_to_threshold = 0;
  bool reached_threshold = false;
  double generalization = 0.0;
  int learner_failures = 0;
  std::optional<std::string> error;
};

struct EvalReport {
  curriculum::Variant variant = curriculum::Variant::kSebn;
  std::vector<SeedResult> seeds;
};

struct Summary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

// Linear-interpolation quartiles (type 7).
Summary summarize(std::vector<double> values);

// Runs one seed and writes <output>/<variant>/seed_<s>/: history.csv,
// rollouts.jsonl, candidates.json, eval.json and policy.json (grid domain).
SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed);

// All seeds (in parallel up to `jobs`), then <output>/<variant>/report.json.
// A failing seed is recorded in the report and does not stop the others.
EvalReport run_experiment(const ExperimentConfig& config);

nlohmann::json seed_result_to_json(const SeedResult& result);
SeedResult seed_result_from_json(const nlohmann::json& doc);
nlohmann::json report_to_json(const EvalReport& report, const ExperimentConfig& config);

// Tidy CSV (generation,variant,seed,metric,value) with one eval_success row per
// checkpoint per seed, read back from every <variant>/seed_<s>/eval.json under
// `run_dir`. Returns the number of data rows.
std::size_t emit_plot_data(const std::filesystem::path& run_dir, const std::filesystem::path& out_csv);

}  // namespace sebn::harness
