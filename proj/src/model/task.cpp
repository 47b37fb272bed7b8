#include "sebn/model/task.hpp"

#include <algorithm>
#include <stdexcept>

namespace sebn::model {

bool TaskDescriptor::enables(const std::string& target) const {
  return std::find(enabled_targets.begin(), enabled_targets.end(), target) != enabled_targets.end();
}

void validate_task(const SebnSpec& spec, const TaskDescriptor& task) {
  if (task.env.size() != spec.env_vars.size()) {
    throw std::invalid_argument("task assigns " + std::to_string(task.env.size()) + " features, spec has " +
                                std::to_string(spec.env_vars.size()));
  }
  for (std::size_t i = 0; i < task.env.size(); ++i) {
    if (task.env[i] < 0 || task.env[i] >= spec.env_vars[i].domain_size) {
      throw std::invalid_argument("feature '" + spec.env_vars[i].id + "' value out of domain");
    }
  }
  if (task.enabled_targets.empty()) throw std::invalid_argument("task enables no targets");
  for (const auto& t : task.enabled_targets) {
    if (!spec.is_target(t)) throw std::invalid_argument("task enables unknown target '" + t + "'");
  }
}

void validate_record(const SebnSpec& spec, const RolloutRecord& record) {
  validate_task(spec, record.task);
  for (const auto& [target, ok] : record.outcomes) {
    if (!spec.is_target(target)) throw std::invalid_argument("outcome for unknown target '" + target + "'");
    if (!record.task.enables(target)) {
      throw std::invalid_argument("outcome for target '" + target + "' that the task does not enable");
    }
  }
}

TaskDescriptor normalize_task(const SebnSpec& spec, TaskDescriptor task) {
  std::vector<std::string> ordered;
  for (const auto& t : spec.target_vars) {
    if (task.enables(t)) ordered.push_back(t);
  }
  for (const auto& t : task.enabled_targets) {
    if (!spec.is_target(t)) throw std::invalid_argument("task enables unknown target '" + t + "'");
  }
  task.enabled_targets = std::move(ordered);
  return task;
}

std::string task_label(const SebnSpec& spec, const TaskDescriptor& task) {
  std::string out;
  for (std::size_t i = 0; i < task.env.size() && i < spec.env_vars.size(); ++i) {
    if (i) out += ' ';
    out += spec.env_vars[i].id + "=" + std::to_string(task.env[i]);
  }
  out += " |";
  for (const auto& t : task.enabled_targets) out += " " + t;
  return out;
}

int task_difficulty(const TaskDescriptor& task) {
  int d = 0;
  for (int v : task.env) d += v;
  return d;
}

std::vector<std::vector<int>> enumerate_env_space(const SebnSpec& spec) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(spec.env_vars.size(), 0);
  while (true) {
    out.push_back(current);
    std::size_t i = current.size();
    while (i > 0) {
      --i;
      if (++current[i] < spec.env_vars[i].domain_size) break;
      current[i] = 0;
      if (i == 0) return out;
    }
    if (current.empty()) return out;
  }
}

nlohmann::json task_to_json(const SebnSpec& spec, const TaskDescriptor& task) {
  nlohmann::json env = nlohmann::json::object();
  for (std::size_t i = 0; i < task.env.size(); ++i) env[spec.env_vars.at(i).id] = task.env[i];
  return {{"env", env}, {"targets", task.enabled_targets}};
}

TaskDescriptor task_from_json(const SebnSpec& spec, const nlohmann::json& doc) {
  TaskDescriptor task;
  const auto& env = doc.at("env");
  for (const auto& v : spec.env_vars) {
    if (!env.contains(v.id)) throw std::invalid_argument("task misses feature '" + v.id + "'");
    task.env.push_back(env.at(v.id).get<int>());
  }
  if (env.size() != spec.env_vars.size()) throw std::invalid_argument("task names unknown features");
  task.enabled_targets = doc.at("targets").get<std::vector<std::string>>();
  task = normalize_task(spec, std::move(task));
  validate_task(spec, task);
  return task;
}

nlohmann::json record_to_json(const SebnSpec& spec, const RolloutRecord& record) {
  nlohmann::json doc = task_to_json(spec, record.task);
  doc["generation"] = record.generation;
  doc["outcomes"] = record.outcomes;
  return doc;
}

RolloutRecord record_from_json(const SebnSpec& spec, const nlohmann::json& doc) {
  RolloutRecord record;
  record.task = task_from_json(spec, doc);
  record.generation = doc.value("generation", 0);
  record.outcomes = doc.at("outcomes").get<std::map<std::string, bool>>();
  validate_record(spec, record);
  return record;
}

}  // namespace sebn::model
