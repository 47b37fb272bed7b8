#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sebn/bayes/network.hpp"
#include "sebn/model/spec.hpp"

namespace sebn::search {

enum class Mode { kMax, kMin };

Mode parse_mode(const std::string& text);
std::string mode_name(Mode mode);

inline constexpr std::size_t kDefaultExhaustiveThreshold = 10000;
inline constexpr double kProbabilityFloor = 1e-12;

struct HeuristicValue {
  double value = 0.0;
  double p_prev = 0.0;
  double p_next = 0.0;
};

// |ln p_prev - ln p_next| * p_next, both probabilities floored at 1e-12.
double heuristic_formula(double p_prev, double p_next);

// Scores partial environment assignments for one target on a pair of networks
// that differ only in their parameters. Uses exact inference when the induced
// width fits `ibound`, weighted mini-buckets otherwise.
class NodeScorer {
 public:
  NodeScorer(const bayes::Network& prev, const bayes::Network& next, int target, int ibound = 20);

  HeuristicValue score(const bayes::Evidence& partial) const;
  bool exact() const { return exact_; }
  int target() const { return target_; }

 private:
  const bayes::Network& prev_;
  const bayes::Network& next_;
  int target_;
  int ibound_;
  bool exact_ = true;
};

HeuristicValue node_heuristic(const bayes::Network& prev, const bayes::Network& next,
                              const bayes::Evidence& partial, int target, int ibound = 20);

struct Candidate {
  std::vector<int> env;  // aligned with the environment variables in network order
  HeuristicValue heuristic;
};

struct CandidateSet {
  std::vector<Candidate> candidates;
  int expansions = 0;          // nodes dequeued
  std::size_t generated = 0;   // children created
  std::size_t frontier = 0;    // open nodes plus completed leaves at the end
  int duplicate_resamples = 0;
};

struct SearchConfig {
  int expansions = 64;
  int n = 20;
  Mode mode = Mode::kMax;
  std::uint64_t seed = 0;
  int ibound = 20;
  // Environment variable indices in branching order; network order when empty.
  std::vector<int> ordering;
  std::optional<int> target;  // last target-layer variable when unset
};

// Best-first expansion of the OR tree over environment assignments. Open
// leaves are completed by sampling the remaining features from the env priors.
CandidateSet select_candidates(const bayes::Network& prev, const bayes::Network& next, const SearchConfig& config);

// Scores every configuration and keeps the best `n` (worst in min mode), ties
// broken by lexicographic assignment.
CandidateSet exhaustive_rank(const bayes::Network& prev, const bayes::Network& next,
                             const std::vector<std::vector<int>>& env_space, int n, Mode mode = Mode::kMax,
                             std::optional<int> target = std::nullopt,
                             std::size_t threshold = kDefaultExhaustiveThreshold, int ibound = 20);

// Candidate dump: [{"env": {feature: value}, "heuristic", "p_prev", "p_next"}]
nlohmann::json candidates_to_json(const bayes::Network& network, const CandidateSet& set);

}  // namespace sebn::search
