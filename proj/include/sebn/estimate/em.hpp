#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sebn/model/sebn.hpp"

namespace sebn::estimate {

struct EmConfig {
  double tolerance = 1e-6;
  int max_iterations = 200;
  int restarts = 4;  // random starts on top of the uniform one
  std::uint64_t seed = 0;
  // Starting point of the first run; uniform when empty.
  std::optional<model::Phi> initial;
};

struct LogLikelihood {
  double value = 0.0;  // -inf when some record is impossible
  int zero_probability = 0;
};

struct PhiEstimate {
  model::Phi phi;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // log-likelihood before each M-step, then the final value
  // Competencies no observed target depends on; they keep the initial vector.
  std::vector<std::string> unidentified;
  int zero_probability_records = 0;
  int restart_index = 0;  // 0 = uniform start
};

// Σ_i log P(K = κ_i | E = e_i; phi), Ψ drawn afresh for every rollout.
LogLikelihood log_likelihood(const model::SebnSpec& spec, const model::Phi& phi,
                             const std::vector<model::RolloutRecord>& data);

// Exact posterior over every base competency for one rollout. Throws
// ZeroProbabilityEvidence when the record is impossible under phi.
std::map<std::string, std::vector<double>> posterior_responsibilities(const model::SebnSpec& spec,
                                                                      const model::Phi& phi,
                                                                      const model::RolloutRecord& record);

// EM on the conditional likelihood. `weights` (optional, aligned with data)
// scale each record's contribution.
PhiEstimate estimate_phi(const model::SebnSpec& spec, const std::vector<model::RolloutRecord>& data,
                         const EmConfig& config = {}, const std::vector<double>& weights = {});

// Base competencies that are ancestors of at least one observed target.
std::vector<std::string> identified_competencies(const model::SebnSpec& spec,
                                                 const std::vector<model::RolloutRecord>& data);

}  // namespace sebn::estimate
