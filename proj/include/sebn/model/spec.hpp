#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sebn::model {

struct Condition {
  std::string variable;
  int value = 0;

  bool operator==(const Condition&) const = default;
};

// `target : (env_conditions | requirements)`. A line applies to every
// environment whose features are at least the listed condition values.
struct RequirementLine {
  std::string target;
  std::vector<Condition> env_conditions;
  std::vector<Condition> requirements;

  bool operator==(const RequirementLine&) const = default;
};

struct EnvVar {
  std::string id;
  int domain_size = 2;

  bool operator==(const EnvVar&) const = default;
};

struct CompetencyVar {
  std::string id;
  int domain_size = 2;
  bool is_base = true;

  bool operator==(const CompetencyVar&) const = default;
};

// Probability vector per base competency.
using Phi = std::map<std::string, std::vector<double>>;

inline constexpr double kDefaultLambda = 0.05;

struct SebnSpec {
  std::vector<EnvVar> env_vars;
  std::vector<CompetencyVar> competency_vars;
  std::vector<std::string> target_vars;  // binary
  std::vector<RequirementLine> requirement_lines;
  double lambda = kDefaultLambda;
  Phi phi_base;
  // Target that decides task success (the last declared target by default).
  std::string terminal_target;

  bool operator==(const SebnSpec&) const = default;

  // Network variable index: environment vars, then competencies, then targets.
  int index_of(std::string_view id) const;
  const std::string& id_at(int index) const;
  bool has(std::string_view id) const;
  int domain_size(std::string_view id) const;
  std::size_t num_variables() const {
    return env_vars.size() + competency_vars.size() + target_vars.size();
  }
  bool is_env(std::string_view id) const;
  bool is_competency(std::string_view id) const;
  bool is_target(std::string_view id) const;
  std::vector<std::string> base_competencies() const;
  // Size of the full environment design space.
  std::size_t env_space_size() const;
};

// Parses requirement lines. Blank lines, `#` comments and `@` directives are
// skipped. A line whose parenthesis is still open continues on the next line.
// Identifiers written with inner spaces ("pick up") are joined with '_'.
std::vector<RequirementLine> parse_requirements(std::string_view text);

// Parses a full spec document: requirement lines plus directives
//   @lambda <real>
//   @env <id> <domain_size>
//   @competency <id> <domain_size>
//   @target <id>
//   @terminal <id>
//   @phi <id> <p0> <p1> ...
// Competencies that are the target of some requirement line are non-base.
// Base competencies without @phi get a uniform vector. Validates the result.
SebnSpec parse_spec(std::string_view text);
SebnSpec load_spec(const std::filesystem::path& path);

std::string format_requirement(const RequirementLine& line);
// Inverse of parse_spec.
std::string format_spec(const SebnSpec& spec);

// Throws ConfigurationError describing the first violated invariant.
void validate_spec(const SebnSpec& spec);
void validate_phi(const SebnSpec& spec, const Phi& phi);

Phi uniform_phi(const SebnSpec& spec);

// SEBN model document: {"format": "sebn-model", "version": 1, "lambda", "terminal",
//   "env": [{id, domain_size}], "competencies": [{id, domain_size, base}],
//   "targets": [id], "lines": [{target, env: [[id, v]], requires: [[id, v]]}],
//   "phi": {id: [p...]}}
nlohmann::json spec_to_json(const SebnSpec& spec);
SebnSpec spec_from_json(const nlohmann::json& doc);

}  // namespace sebn::model
