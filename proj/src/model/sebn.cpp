#include "sebn/model/sebn.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <stdexcept>

#include "sebn/bayes/inference.hpp"
#include "sebn/errors.hpp"

namespace sebn::model {
namespace {

// Depth-first search over requirement edges (target -> requirement).
void check_acyclic(const SebnSpec& spec) {
  std::map<std::string, std::set<std::string>> requires_of;
  for (const auto& l : spec.requirement_lines) {
    for (const auto& r : l.requirements) requires_of[l.target].insert(r.variable);
  }
  std::map<std::string, int> state;  // 0 new, 1 on stack, 2 done
  std::vector<std::string> stack;
  std::function<void(const std::string&)> visit = [&](const std::string& node) {
    state[node] = 1;
    stack.push_back(node);
    for (const auto& next : requires_of[node]) {
      if (state[next] == 1) {
        std::string cycle;
        for (auto it = std::find(stack.begin(), stack.end(), next); it != stack.end(); ++it) {
          cycle += *it + " -> ";
        }
        throw CycleError("cyclic requirements: " + cycle + next);
      }
      if (state[next] == 0) visit(next);
    }
    stack.pop_back();
    state[node] = 2;
  };
  std::vector<std::string> roots;
  for (const auto& [node, unused] : requires_of) roots.push_back(node);
  for (const auto& node : roots) {
    if (state[node] == 0) visit(node);
  }
}

std::vector<double> normalized_prior(const std::string& id, std::vector<double> probs, int domain) {
  if (static_cast<int>(probs.size()) != domain) {
    throw ConfigurationError("prior for '" + id + "' has wrong length");
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ConfigurationError("prior for '" + id + "' has a negative entry");
    total += p;
  }
  if (!(total > 0.0)) throw ConfigurationError("prior for '" + id + "' has no mass");
  for (double& p : probs) p /= total;
  return probs;
}

}  // namespace

bayes::FactorTable synthesize_cpt(const SebnSpec& spec, std::string_view target) {
  if (!spec.is_target(target) && !spec.is_competency(target)) {
    throw std::invalid_argument("'" + std::string(target) + "' is not a target or competency");
  }
  std::vector<const RequirementLine*> lines;
  for (const auto& l : spec.requirement_lines) {
    if (l.target == target) lines.push_back(&l);
  }
  if (lines.empty()) throw ConfigurationError("'" + std::string(target) + "' has no requirement lines");

  const int child = spec.index_of(target);
  std::set<int> parent_set;
  for (const auto* l : lines) {
    for (const auto& c : l->env_conditions) parent_set.insert(spec.index_of(c.variable));
    for (const auto& r : l->requirements) parent_set.insert(spec.index_of(r.variable));
  }
  parent_set.erase(child);
  std::vector<int> scope(parent_set.begin(), parent_set.end());
  std::vector<int> parent_dims;
  for (int v : scope) parent_dims.push_back(spec.domain_size(spec.id_at(v)));

  auto position = [&](const std::string& id) {
    return std::find(scope.begin(), scope.end(), spec.index_of(id)) - scope.begin();
  };
  const double lambda = spec.lambda;
  std::vector<double> values;
  std::map<std::ptrdiff_t, int> required;
  for (bayes::AssignmentCounter c(parent_dims); !c.done(); c.next()) {
    const auto& a = c.values();
    required.clear();
    bool matched = false;
    for (const auto* l : lines) {
      bool match = std::all_of(l->env_conditions.begin(), l->env_conditions.end(),
                               [&](const Condition& cond) { return a[position(cond.variable)] >= cond.value; });
      if (!match) continue;
      matched = true;
      for (const auto& r : l->requirements) {
        auto& level = required[position(r.variable)];
        level = std::max(level, r.value);
      }
    }
    bool met = true;
    if (matched) {
      for (const auto& [pos, level] : required) met = met && a[pos] >= level;
    }
    values.push_back(met ? lambda : 1.0 - lambda);
    values.push_back(met ? 1.0 - lambda : lambda);
  }
  scope.push_back(child);
  parent_dims.push_back(2);
  return bayes::FactorTable(std::move(scope), std::move(parent_dims), std::move(values));
}

bayes::Network assemble_sebn(const SebnSpec& spec, const std::optional<EnvPrior>& env_prior) {
  return assemble_sebn(spec, spec.phi_base, env_prior);
}

bayes::Network assemble_sebn(const SebnSpec& spec, const Phi& phi, const std::optional<EnvPrior>& env_prior) {
  check_acyclic(spec);
  validate_phi(spec, phi);
  std::vector<bayes::DiscreteVariable> vars;
  std::vector<bayes::FactorTable> cpts;
  auto add_prior = [&](std::vector<double> probs) {
    const int idx = static_cast<int>(cpts.size());
    const int dim = static_cast<int>(probs.size());
    cpts.emplace_back(std::vector<int>{idx}, std::vector<int>{dim}, std::move(probs));
  };
  for (const auto& v : spec.env_vars) {
    vars.push_back({v.id, v.domain_size, bayes::Layer::kEnvironment});
    std::vector<double> probs(v.domain_size, 1.0 / v.domain_size);
    if (env_prior) {
      if (auto it = env_prior->find(v.id); it != env_prior->end()) {
        probs = normalized_prior(v.id, it->second, v.domain_size);
      }
    }
    add_prior(std::move(probs));
  }
  for (const auto& c : spec.competency_vars) {
    vars.push_back({c.id, c.domain_size, bayes::Layer::kCompetency});
    if (c.is_base) {
      add_prior(normalized_prior(c.id, phi.at(c.id), c.domain_size));
    } else {
      cpts.push_back(synthesize_cpt(spec, c.id));
    }
  }
  for (const auto& t : spec.target_vars) {
    vars.push_back({t, 2, bayes::Layer::kTarget});
    cpts.push_back(synthesize_cpt(spec, t));
  }
  return bayes::Network(std::move(vars), std::move(cpts));
}

EnvPrior empirical_env_prior(const SebnSpec& spec, const std::vector<TaskDescriptor>& tasks) {
  EnvPrior prior;
  for (std::size_t i = 0; i < spec.env_vars.size(); ++i) {
    std::vector<double> counts(spec.env_vars[i].domain_size, 1.0);
    for (const auto& t : tasks) {
      if (i < t.env.size() && t.env[i] >= 0 && t.env[i] < spec.env_vars[i].domain_size) counts[t.env[i]] += 1.0;
    }
    double total = 0.0;
    for (double c : counts) total += c;
    for (double& c : counts) c /= total;
    prior[spec.env_vars[i].id] = std::move(counts);
  }
  return prior;
}

bayes::Evidence env_evidence(const bayes::Network& network, const TaskDescriptor& task) {
  const auto env = network.indices_in_layer(bayes::Layer::kEnvironment);
  if (env.size() != task.env.size()) {
    throw std::invalid_argument("task assigns " + std::to_string(task.env.size()) + " features, network has " +
                                std::to_string(env.size()));
  }
  bayes::Evidence evidence;
  for (std::size_t i = 0; i < env.size(); ++i) {
    if (task.env[i] < 0 || task.env[i] >= network.variable(env[i]).domain_size) {
      throw std::invalid_argument("feature '" + network.variable(env[i]).id + "' value out of domain");
    }
    evidence[env[i]] = task.env[i];
  }
  return evidence;
}

double predict_success(const bayes::Network& network, const TaskDescriptor& task, std::string_view target) {
  const int t = network.index_of(target);
  if (network.variable(t).layer != bayes::Layer::kTarget) {
    throw std::invalid_argument("'" + std::string(target) + "' is not a target variable");
  }
  if (!task.enables(std::string(target))) {
    throw std::invalid_argument("target '" + std::string(target) + "' is not enabled by the task");
  }
  return bayes::query_marginal(network, env_evidence(network, task), {t}).values()[1];
}

std::map<std::string, std::vector<double>> competency_posterior(const bayes::Network& network,
                                                                const std::vector<RolloutRecord>& observations) {
  if (observations.empty()) throw std::invalid_argument("competency posterior needs at least one observation");
  const auto competencies = network.indices_in_layer(bayes::Layer::kCompetency);
  for (int c : competencies) {
    for (int p : network.parents(c)) {
      if (network.variable(p).layer != bayes::Layer::kCompetency) {
        throw ConfigurationError("competency '" + network.variable(c).id +
                                 "' depends on a per-task variable and cannot be shared across rollouts");
      }
    }
  }

  bayes::FactorGraph graph;
  graph.domain_sizes = network.domain_sizes();
  for (int c : competencies) graph.factors.push_back(network.cpt(c));

  bayes::Evidence evidence;
  const int n = static_cast<int>(network.size());
  for (const auto& obs : observations) {
    for (const auto& [target, ok] : obs.outcomes) {
      auto idx = network.find(target);
      if (!idx || network.variable(*idx).layer != bayes::Layer::kTarget) {
        throw std::invalid_argument("observation references unknown target '" + target + "'");
      }
      if (!obs.task.enables(target)) {
        throw std::invalid_argument("observation reports target '" + target + "' that its task does not enable");
      }
    }
    const auto env = env_evidence(network, obs.task);
    // Per-observation copies of every environment and target variable.
    std::vector<int> remap(n);
    for (int v = 0; v < n; ++v) {
      if (network.variable(v).layer == bayes::Layer::kCompetency) {
        remap[v] = v;
      } else {
        remap[v] = static_cast<int>(graph.domain_sizes.size());
        graph.domain_sizes.push_back(network.variable(v).domain_size);
      }
    }
    for (int v = 0; v < n; ++v) {
      if (network.variable(v).layer == bayes::Layer::kCompetency) continue;
      const auto& f = network.cpt(v);
      std::vector<int> scope;
      for (int s : f.scope()) scope.push_back(remap[s]);
      graph.factors.emplace_back(std::move(scope), f.dims(), f.values());
    }
    for (const auto& [var, value] : env) evidence[remap[var]] = value;
    for (const auto& [target, ok] : obs.outcomes) evidence[remap[network.index_of(target)]] = ok ? 1 : 0;
  }

  std::map<std::string, std::vector<double>> out;
  for (int c : competencies) {
    out[network.variable(c).id] = bayes::query_marginal(graph, evidence, {c}).values();
  }
  return out;
}

std::map<std::string, bool> sample_outcomes(const bayes::Network& network, const TaskDescriptor& task,
                                            std::mt19937_64& rng) {
  const auto values = bayes::forward_sample(network, env_evidence(network, task), rng);
  std::map<std::string, bool> out;
  for (const auto& t : task.enabled_targets) out[t] = values[network.index_of(t)] == 1;
  return out;
}

}  // namespace sebn::model
