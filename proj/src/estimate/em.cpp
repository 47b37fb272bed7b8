#include "sebn/estimate/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>

#include "sebn/bayes/inference.hpp"
#include "sebn/errors.hpp"

namespace sebn::estimate {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Group {
  model::TaskDescriptor task;
  std::map<std::string, bool> outcomes;
  double weight = 0.0;
};

struct GroupResult {
  bool possible = true;
  double log_conditional = kNegInf;
  std::vector<std::vector<double>> posterior;  // per base competency
};

std::vector<Group> group_records(const model::SebnSpec& spec, const std::vector<model::RolloutRecord>& data,
                                 const std::vector<double>& weights) {
  if (!weights.empty() && weights.size() != data.size()) {
    throw std::invalid_argument("weights must align with the rollout records");
  }
  std::map<std::pair<std::vector<int>, std::map<std::string, bool>>, std::size_t> index;
  std::vector<Group> groups;
  for (std::size_t i = 0; i < data.size(); ++i) {
    model::validate_record(spec, data[i]);
    const double w = weights.empty() ? 1.0 : weights[i];
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("record weights must be finite and >= 0");
    auto key = std::make_pair(data[i].task.env, data[i].outcomes);
    auto [it, fresh] = index.emplace(key, groups.size());
    if (fresh) groups.push_back({data[i].task, data[i].outcomes, 0.0});
    groups[it->second].weight += w;
  }
  return groups;
}

bayes::Evidence record_evidence(const bayes::Network& net, const model::TaskDescriptor& task,
                                const std::map<std::string, bool>& outcomes) {
  bayes::Evidence ev = model::env_evidence(net, task);
  for (const auto& [t, ok] : outcomes) ev[net.index_of(t)] = ok ? 1 : 0;
  return ev;
}

double log_env_probability(const bayes::Network& net, const bayes::Evidence& env) {
  double s = 0.0;
  for (const auto& [v, value] : env) s += std::log(net.cpt(v).values()[value]);
  return s;
}

std::vector<int> base_indices(const model::SebnSpec& spec) {
  std::vector<int> out;
  for (const auto& id : spec.base_competencies()) out.push_back(spec.index_of(id));
  return out;
}

constexpr std::size_t kMaxJoint = 1u << 14;

// P(kappa | e, psi_B) over the joint of the base competencies, one table per
// group. It does not depend on phi, so EM only reweights it. Empty when the
// joint is too large to tabulate.
std::vector<std::vector<double>> likelihood_tables(const model::SebnSpec& spec, const std::vector<Group>& groups) {
  const bayes::Network net = model::assemble_sebn(spec, model::uniform_phi(spec));
  const std::vector<int> base = base_indices(spec);
  std::size_t joint_size = 1;
  for (int c : base) joint_size *= net.variable(c).domain_size;
  if (joint_size > kMaxJoint) return {};
  std::vector<std::vector<double>> out;
  for (const auto& g : groups) {
    const bayes::Evidence ev = record_evidence(net, g.task, g.outcomes);
    const double joint = bayes::log_probability_of_evidence(net, ev);
    if (!std::isfinite(joint)) {
      out.emplace_back(joint_size, 0.0);
      continue;
    }
    // P(psi | e, kappa) P(kappa | e) / P(psi) with a uniform P(psi).
    const double scale = std::exp(joint - log_env_probability(net, model::env_evidence(net, g.task))) *
                         static_cast<double>(joint_size);
    auto table = bayes::query_marginal(net, ev, base).values();
    for (double& v : table) v *= scale;
    out.push_back(std::move(table));
  }
  return out;
}

GroupResult reweight(const std::vector<double>& table, const std::vector<int>& dims,
                     const std::vector<const std::vector<double>*>& phi, bool want_posterior) {
  GroupResult r;
  if (want_posterior) {
    r.posterior.resize(dims.size());
    for (std::size_t k = 0; k < dims.size(); ++k) r.posterior[k].assign(dims[k], 0.0);
  }
  double total = 0.0;
  bayes::AssignmentCounter counter(dims);
  for (std::size_t i = 0; !counter.done(); counter.next(), ++i) {
    double p = table[i];
    if (p == 0.0) continue;
    for (std::size_t k = 0; k < dims.size(); ++k) p *= (*phi[k])[counter.values()[k]];
    total += p;
    if (want_posterior) {
      for (std::size_t k = 0; k < dims.size(); ++k) r.posterior[k][counter.values()[k]] += p;
    }
  }
  if (!(total > 0.0)) {
    r.possible = false;
    return r;
  }
  r.log_conditional = std::min(0.0, std::log(total));
  for (auto& v : r.posterior) {
    for (double& x : v) x /= total;
  }
  return r;
}

GroupResult evaluate(const bayes::Network& net, const std::vector<int>& base, const Group& g, bool want_posterior) {
  GroupResult r;
  const bayes::Evidence env = model::env_evidence(net, g.task);
  const bayes::Evidence ev = record_evidence(net, g.task, g.outcomes);
  const double joint = bayes::log_probability_of_evidence(net, ev);
  if (!std::isfinite(joint)) {
    r.possible = false;
    return r;
  }
  r.log_conditional = std::min(0.0, joint - log_env_probability(net, env));
  if (!want_posterior) return r;

  std::size_t joint_size = 1;
  for (int c : base) joint_size *= net.variable(c).domain_size;
  r.posterior.resize(base.size());
  if (joint_size <= (1u << 14)) {
    const auto table = bayes::query_marginal(net, ev, base);
    for (std::size_t k = 0; k < base.size(); ++k) r.posterior[k].assign(net.variable(base[k]).domain_size, 0.0);
    bayes::AssignmentCounter counter(table.dims());
    for (std::size_t i = 0; !counter.done(); counter.next(), ++i) {
      for (std::size_t k = 0; k < base.size(); ++k) r.posterior[k][counter.values()[k]] += table.values()[i];
    }
  } else {
    for (std::size_t k = 0; k < base.size(); ++k) r.posterior[k] = bayes::query_marginal(net, ev, {base[k]}).values();
  }
  return r;
}

model::Phi dirichlet_phi(const model::SebnSpec& spec, std::mt19937_64& rng) {
  model::Phi phi;
  std::gamma_distribution<double> gamma(1.0, 1.0);
  for (const auto& id : spec.base_competencies()) {
    std::vector<double> v(spec.domain_size(id));
    double s = 0.0;
    for (double& x : v) s += (x = gamma(rng) + 1e-12);
    for (double& x : v) x /= s;
    phi[id] = v;
  }
  return phi;
}

PhiEstimate run_em(const model::SebnSpec& spec, const std::vector<Group>& groups,
                   const std::vector<std::vector<double>>& tables, model::Phi phi, const std::set<std::string>& frozen,
                   const EmConfig& config) {
  const std::vector<int> base = base_indices(spec);
  const auto names = spec.base_competencies();
  std::vector<int> dims;
  for (const auto& id : names) dims.push_back(spec.domain_size(id));
  PhiEstimate est;
  double prev = kNegInf;
  for (int it = 0;; ++it) {
    std::optional<bayes::Network> net;
    if (tables.empty()) net = model::assemble_sebn(spec, phi);
    std::vector<const std::vector<double>*> current;
    for (const auto& id : names) current.push_back(&phi.at(id));
    const bool last = it >= config.max_iterations;
    double ll = 0.0;
    int zero = 0;
    std::vector<std::vector<double>> acc(base.size());
    for (std::size_t k = 0; k < base.size(); ++k) acc[k].assign(dims[k], 0.0);
    double mass = 0.0;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& g = groups[gi];
      const GroupResult r =
          tables.empty() ? evaluate(*net, base, g, !last) : reweight(tables[gi], dims, current, !last);
      if (!r.possible) {
        ++zero;
        continue;
      }
      ll += g.weight * r.log_conditional;
      if (last) continue;
      mass += g.weight;
      for (std::size_t k = 0; k < base.size(); ++k) {
        for (std::size_t l = 0; l < acc[k].size(); ++l) acc[k][l] += g.weight * r.posterior[k][l];
      }
    }
    if (zero > 0) ll = kNegInf;
    est.trace.push_back(ll);
    est.phi = phi;
    est.log_likelihood = ll;
    est.zero_probability_records = zero;
    est.iterations = it;
    if (it > 0 && std::isfinite(ll) && ll - prev < config.tolerance) {
      est.converged = true;
      break;
    }
    if (last || mass <= 0.0) break;
    for (std::size_t k = 0; k < base.size(); ++k) {
      if (frozen.count(names[k])) continue;
      double s = 0.0;
      for (double x : acc[k]) s += x;
      for (double& x : acc[k]) x /= s;
      phi[names[k]] = acc[k];
    }
    prev = ll;
  }
  return est;
}

}  // namespace

std::vector<std::string> identified_competencies(const model::SebnSpec& spec,
                                                 const std::vector<model::RolloutRecord>& data) {
  const bayes::Network net = model::assemble_sebn(spec, model::uniform_phi(spec));
  std::set<int> seen;
  std::vector<int> stack;
  for (const auto& r : data) {
    for (const auto& [t, ok] : r.outcomes) stack.push_back(net.index_of(t));
  }
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (!seen.insert(v).second) continue;
    for (int p : net.parents(v)) stack.push_back(p);
  }
  std::vector<std::string> out;
  for (const auto& id : spec.base_competencies()) {
    if (seen.count(spec.index_of(id))) out.push_back(id);
  }
  return out;
}

LogLikelihood log_likelihood(const model::SebnSpec& spec, const model::Phi& phi,
                             const std::vector<model::RolloutRecord>& data) {
  if (data.empty()) throw std::invalid_argument("log_likelihood needs at least one rollout");
  const auto groups = group_records(spec, data, {});
  const bayes::Network net = model::assemble_sebn(spec, phi);
  const std::vector<int> base = base_indices(spec);
  LogLikelihood out;
  for (const auto& g : groups) {
    const GroupResult r = evaluate(net, base, g, false);
    if (!r.possible) {
      out.zero_probability += static_cast<int>(g.weight);
      continue;
    }
    out.value += g.weight * r.log_conditional;
  }
  if (out.zero_probability > 0) out.value = kNegInf;
  return out;
}

std::map<std::string, std::vector<double>> posterior_responsibilities(const model::SebnSpec& spec,
                                                                      const model::Phi& phi,
                                                                      const model::RolloutRecord& record) {
  model::validate_record(spec, record);
  const bayes::Network net = model::assemble_sebn(spec, phi);
  const std::vector<int> base = base_indices(spec);
  const GroupResult r = evaluate(net, base, {record.task, record.outcomes, 1.0}, true);
  if (!r.possible) throw ZeroProbabilityEvidence("rollout has probability zero under phi");
  std::map<std::string, std::vector<double>> out;
  const auto names = spec.base_competencies();
  for (std::size_t k = 0; k < base.size(); ++k) out[names[k]] = r.posterior[k];
  return out;
}

PhiEstimate estimate_phi(const model::SebnSpec& spec, const std::vector<model::RolloutRecord>& data,
                         const EmConfig& config, const std::vector<double>& weights) {
  if (data.empty()) throw std::invalid_argument("estimate_phi needs at least one rollout");
  if (!(config.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (config.max_iterations < 0 || config.restarts < 0) throw std::invalid_argument("negative iteration budget");
  const auto groups = group_records(spec, data, weights);

  const model::Phi start = config.initial ? *config.initial : model::uniform_phi(spec);
  model::validate_phi(spec, start);
  const auto identified = identified_competencies(spec, data);
  std::set<std::string> frozen;
  std::vector<std::string> unidentified;
  for (const auto& id : spec.base_competencies()) {
    if (std::find(identified.begin(), identified.end(), id) == identified.end()) {
      frozen.insert(id);
      unidentified.push_back(id);
    }
  }

  const auto tables = likelihood_tables(spec, groups);
  std::mt19937_64 rng(config.seed);
  PhiEstimate best;
  bool have = false;
  for (int r = 0; r <= config.restarts; ++r) {
    model::Phi init = start;
    if (r > 0) {
      const model::Phi random = dirichlet_phi(spec, rng);
      for (const auto& [id, v] : random) {
        if (!frozen.count(id)) init[id] = v;
      }
    }
    PhiEstimate est = run_em(spec, groups, tables, init, frozen, config);
    est.restart_index = r;
    if (!have || est.log_likelihood > best.log_likelihood) {
      best = std::move(est);
      have = true;
    }
  }
  best.unidentified = unidentified;
  return best;
}

}  // namespace sebn::estimate
