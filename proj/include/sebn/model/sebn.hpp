#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sebn/bayes/network.hpp"
#include "sebn/model/spec.hpp"
#include "sebn/model/task.hpp"

namespace sebn::model {

// Distribution per environment feature; uniform when a feature is missing.
using EnvPrior = std::map<std::string, std::vector<double>>;

// Conditional factor for a target or derived competency. Scope is every
// variable mentioned by the target's requirement lines (network index order)
// followed by the target. A line matches a parent assignment when each of its
// environment features is at least the condition value; each requirement
// variable must reach the largest level demanded by any matching line. The
// target succeeds with 1 - lambda when all demands are met (or nothing
// matches), otherwise with lambda.
bayes::FactorTable synthesize_cpt(const SebnSpec& spec, std::string_view target);

// Network over env features, competencies and targets using spec.phi_base.
bayes::Network assemble_sebn(const SebnSpec& spec, const std::optional<EnvPrior>& env_prior = std::nullopt);
// Same with Φ_B replaced by `phi`.
bayes::Network assemble_sebn(const SebnSpec& spec, const Phi& phi,
                             const std::optional<EnvPrior>& env_prior = std::nullopt);

// Empirical feature frequencies of `tasks`, Laplace-smoothed so every value
// keeps positive mass.
EnvPrior empirical_env_prior(const SebnSpec& spec, const std::vector<TaskDescriptor>& tasks);

// P(target = 1 | E = task.env).
double predict_success(const bayes::Network& network, const TaskDescriptor& task, std::string_view target);

// P(Ψ_j | observations) for each competency, with one agent (shared Ψ) and
// the environment and targets replicated per observation.
std::map<std::string, std::vector<double>> competency_posterior(const bayes::Network& network,
                                                                const std::vector<RolloutRecord>& observations);

// Forward-sampled outcome of every enabled target with E fixed to task.env.
std::map<std::string, bool> sample_outcomes(const bayes::Network& network, const TaskDescriptor& task,
                                            std::mt19937_64& rng);

// Evidence fixing the environment features of `task`.
bayes::Evidence env_evidence(const bayes::Network& network, const TaskDescriptor& task);

}  // namespace sebn::model
