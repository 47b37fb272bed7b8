#include "sebn/bayes/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>
#include <stdexcept>

#include "sebn/errors.hpp"

namespace sebn::bayes {

std::string_view layer_name(Layer layer) {
  switch (layer) {
    case Layer::kEnvironment: return "environment";
    case Layer::kCompetency: return "competency";
    case Layer::kTarget: return "target";
    case Layer::kUntagged: break;
  }
  return "untagged";
}

Layer parse_layer(std::string_view name) {
  if (name == "environment") return Layer::kEnvironment;
  if (name == "competency") return Layer::kCompetency;
  if (name == "target") return Layer::kTarget;
  if (name == "untagged" || name.empty()) return Layer::kUntagged;
  throw std::invalid_argument("unknown layer tag '" + std::string(name) + "'");
}

FactorTable::FactorTable(std::vector<int> scope, std::vector<int> dims, std::vector<double> values)
    : scope_(std::move(scope)), dims_(std::move(dims)), values_(std::move(values)) {
  if (scope_.size() != dims_.size()) {
    throw std::invalid_argument("factor scope and dims differ in length");
  }
  std::size_t expected = 1;
  for (int d : dims_) {
    if (d < 1) throw std::invalid_argument("factor dimension must be positive");
    expected *= static_cast<std::size_t>(d);
  }
  if (values_.size() != expected) {
    throw std::invalid_argument("factor table has " + std::to_string(values_.size()) +
                                " entries, expected " + std::to_string(expected));
  }
  std::vector<int> sorted = scope_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("factor scope contains a repeated variable");
  }
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("factor entries must be finite and non-negative");
    }
  }
}

FactorTable FactorTable::constant(double value) { return FactorTable({}, {}, {value}); }

bool FactorTable::contains(int var) const { return position_of(var) >= 0; }

int FactorTable::position_of(int var) const {
  auto it = std::find(scope_.begin(), scope_.end(), var);
  return it == scope_.end() ? -1 : static_cast<int>(it - scope_.begin());
}

std::size_t FactorTable::index_of(std::span<const int> assignment) const {
  if (assignment.size() != scope_.size()) {
    throw std::invalid_argument("assignment length does not match factor scope");
  }
  std::size_t index = 0;
  for (std::size_t i = 0; i < scope_.size(); ++i) {
    if (assignment[i] < 0 || assignment[i] >= dims_[i]) {
      throw std::invalid_argument("assignment value out of domain");
    }
    index = index * static_cast<std::size_t>(dims_[i]) + static_cast<std::size_t>(assignment[i]);
  }
  return index;
}

double FactorTable::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

double FactorTable::max() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

AssignmentCounter::AssignmentCounter(std::vector<int> dims)
    : dims_(std::move(dims)), values_(dims_.size(), 0) {
  for (int d : dims_) {
    if (d < 1) done_ = true;
  }
}

std::size_t AssignmentCounter::next() {
  for (std::size_t i = dims_.size(); i-- > 0;) {
    if (++values_[i] < dims_[i]) return i;
    values_[i] = 0;
  }
  done_ = true;
  return 0;
}

Network::Network(std::vector<DiscreteVariable> variables, std::vector<FactorTable> cpts)
    : variables_(std::move(variables)), cpts_(std::move(cpts)) {
  const int n = static_cast<int>(variables_.size());
  if (cpts_.size() != variables_.size()) {
    throw std::invalid_argument("network needs exactly one conditional factor per variable");
  }
  for (int i = 0; i < n; ++i) {
    const auto& v = variables_[i];
    if (v.domain_size < 1) throw std::invalid_argument("variable '" + v.id + "' has empty domain");
    if (!index_.emplace(v.id, i).second) {
      throw std::invalid_argument("duplicate variable id '" + v.id + "'");
    }
  }
  for (int i = 0; i < n; ++i) {
    const FactorTable& f = cpts_[i];
    if (f.scope().empty() || f.scope().back() != i) {
      throw std::invalid_argument("factor for '" + variables_[i].id +
                                  "' must list the child variable last");
    }
    for (std::size_t k = 0; k < f.scope().size(); ++k) {
      int var = f.scope()[k];
      if (var < 0 || var >= n) throw std::invalid_argument("factor references undeclared variable");
      if (f.dims()[k] != variables_[var].domain_size) {
        throw std::invalid_argument("factor dimension mismatch for variable '" +
                                    variables_[var].id + "'");
      }
    }
    const int child_dim = f.dims().back();
    for (std::size_t row = 0; row < f.size(); row += child_dim) {
      double total = 0.0;
      for (int c = 0; c < child_dim; ++c) total += f.values()[row + c];
      if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("conditional factor for '" + variables_[i].id +
                                    "' does not sum to 1 over the child");
      }
    }
  }

  // Kahn's algorithm with index-ordered ready set.
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> children(n);
  for (int i = 0; i < n; ++i) {
    for (int p : parents(i)) {
      children[p].push_back(i);
      ++indegree[i];
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  while (!ready.empty()) {
    int v = ready.top();
    ready.pop();
    topo_order_.push_back(v);
    for (int c : children[v]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  if (static_cast<int>(topo_order_.size()) != n) {
    throw CycleError("network parent graph contains a directed cycle");
  }
}

std::vector<int> Network::parents(int index) const {
  const auto& scope = cpts_.at(index).scope();
  return {scope.begin(), scope.end() - 1};
}

std::vector<int> Network::domain_sizes() const {
  std::vector<int> out;
  out.reserve(variables_.size());
  for (const auto& v : variables_) out.push_back(v.domain_size);
  return out;
}

int Network::index_of(std::string_view id) const {
  auto found = find(id);
  if (!found) throw std::invalid_argument("unknown variable id '" + std::string(id) + "'");
  return *found;
}

std::optional<int> Network::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> Network::indices_in_layer(Layer layer) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(variables_.size()); ++i) {
    if (variables_[i].layer == layer) out.push_back(i);
  }
  return out;
}

Evidence Network::make_evidence(const std::vector<std::pair<std::string, int>>& assignments) const {
  Evidence evidence;
  for (const auto& [id, value] : assignments) {
    int idx = index_of(id);
    if (value < 0 || value >= variables_[idx].domain_size) {
      throw std::invalid_argument("evidence value out of domain for '" + id + "'");
    }
    evidence[idx] = value;
  }
  return evidence;
}

FactorGraph FactorGraph::from_network(const Network& network) {
  return FactorGraph{network.domain_sizes(), network.cpts()};
}

int sample_index(const std::vector<double>& weights, std::mt19937_64& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("cannot sample from zero weights");
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double acc = 0.0;
  int last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  return last;
}

std::vector<int> forward_sample(const Network& network, const Evidence& fixed, std::mt19937_64& rng) {
  std::vector<int> values(network.size(), 0);
  std::vector<int> row;
  for (int v : network.topological_order()) {
    if (auto it = fixed.find(v); it != fixed.end()) {
      values[v] = it->second;
      continue;
    }
    const FactorTable& cpt = network.cpt(v);
    row.clear();
    for (int s : cpt.scope()) row.push_back(s == v ? 0 : values[s]);
    const std::size_t base = cpt.index_of(row);
    const int dim = network.variable(v).domain_size;
    std::vector<double> w(cpt.values().begin() + base, cpt.values().begin() + base + dim);
    values[v] = sample_index(w, rng);
  }
  return values;
}

}  // namespace sebn::bayes
