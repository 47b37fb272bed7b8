#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sebn/model/spec.hpp"

namespace sebn::model {

// Environment feature values (aligned with SebnSpec::env_vars) plus the set of
// targets the task enables (kept in spec declaration order).
struct TaskDescriptor {
  std::vector<int> env;
  std::vector<std::string> enabled_targets;

  auto operator<=>(const TaskDescriptor&) const = default;
  bool operator==(const TaskDescriptor&) const = default;

  bool enables(const std::string& target) const;
};

// One episode: the task that was run and the outcome of every enabled target.
struct RolloutRecord {
  TaskDescriptor task;
  std::map<std::string, bool> outcomes;
  int generation = 0;

  bool operator==(const RolloutRecord&) const = default;
};

// Throws std::invalid_argument when the descriptor does not fit the spec.
void validate_task(const SebnSpec& spec, const TaskDescriptor& task);
void validate_record(const SebnSpec& spec, const RolloutRecord& record);

// Sorts/deduplicates enabled targets into declaration order.
TaskDescriptor normalize_task(const SebnSpec& spec, TaskDescriptor task);

// "distance=1 wall=0 exists_door=1 | haskey dooropened goalreached"
std::string task_label(const SebnSpec& spec, const TaskDescriptor& task);

// Sum of environment feature values.
int task_difficulty(const TaskDescriptor& task);

// Every environment assignment in lexicographic order (last feature fastest).
std::vector<std::vector<int>> enumerate_env_space(const SebnSpec& spec);

nlohmann::json task_to_json(const SebnSpec& spec, const TaskDescriptor& task);
TaskDescriptor task_from_json(const SebnSpec& spec, const nlohmann::json& doc);

// Rollout log line: {"generation": g, "env": {feature: value}, "targets": [...],
// "outcomes": {target: bool}}
nlohmann::json record_to_json(const SebnSpec& spec, const RolloutRecord& record);
RolloutRecord record_from_json(const SebnSpec& spec, const nlohmann::json& doc);

}  // namespace sebn::model
