#include "sebn/bayes/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sebn/errors.hpp"

namespace sebn::bayes {
namespace {

struct Elimination {
  FactorTable table;  // over the requested targets, unnormalized
  double log_scale = 0.0;
};

std::vector<std::size_t> strides_for(const FactorTable& f) {
  std::vector<std::size_t> strides(f.scope().size(), 1);
  for (std::size_t i = f.scope().size(); i-- > 1;) {
    strides[i - 1] = strides[i] * static_cast<std::size_t>(f.dims()[i]);
  }
  return strides;
}

// Multiplies `factors` and eliminates `elim` (if >= 0) with the weighted power
// sum (sum_x f^(1/weight))^weight. weight == 1 is the ordinary sum. The output
// scope is the sorted union of input scopes minus `elim`.
FactorTable combine(const std::vector<const FactorTable*>& factors,
                    const std::vector<int>& domain_sizes, int elim, double weight) {
  std::vector<int> out_scope;
  for (const FactorTable* f : factors) {
    for (int v : f->scope()) {
      if (v != elim) out_scope.push_back(v);
    }
  }
  std::sort(out_scope.begin(), out_scope.end());
  out_scope.erase(std::unique(out_scope.begin(), out_scope.end()), out_scope.end());

  std::vector<int> out_dims;
  std::size_t out_size = 1;
  for (int v : out_scope) {
    out_dims.push_back(domain_sizes[v]);
    out_size *= static_cast<std::size_t>(domain_sizes[v]);
  }
  const int inner = elim >= 0 ? domain_sizes[elim] : 1;

  const std::size_t k = factors.size();
  // stride of each factor along each output variable, and along elim.
  std::vector<std::vector<std::size_t>> out_strides(k, std::vector<std::size_t>(out_scope.size(), 0));
  std::vector<std::size_t> elim_stride(k, 0);
  for (std::size_t j = 0; j < k; ++j) {
    const auto strides = strides_for(*factors[j]);
    const auto& scope = factors[j]->scope();
    for (std::size_t p = 0; p < scope.size(); ++p) {
      if (scope[p] == elim) {
        elim_stride[j] = strides[p];
      } else {
        auto pos = std::lower_bound(out_scope.begin(), out_scope.end(), scope[p]) - out_scope.begin();
        out_strides[j][pos] = strides[p];
      }
    }
  }

  std::vector<double> out(out_size, 0.0);
  std::vector<std::size_t> base(k, 0);
  std::vector<int> digits(out_scope.size(), 0);
  const bool plain_sum = weight == 1.0;
  const double inv_weight = 1.0 / weight;
  for (std::size_t o = 0; o < out_size; ++o) {
    double acc = 0.0;
    for (int x = 0; x < inner; ++x) {
      double p = 1.0;
      for (std::size_t j = 0; j < k; ++j) {
        p *= factors[j]->values()[base[j] + static_cast<std::size_t>(x) * elim_stride[j]];
      }
      acc += plain_sum ? p : std::pow(p, inv_weight);
    }
    out[o] = plain_sum ? acc : std::pow(acc, weight);

    for (std::size_t i = out_scope.size(); i-- > 0;) {
      if (++digits[i] < out_dims[i]) {
        for (std::size_t j = 0; j < k; ++j) base[j] += out_strides[j][i];
        break;
      }
      for (std::size_t j = 0; j < k; ++j) {
        base[j] -= out_strides[j][i] * static_cast<std::size_t>(out_dims[i] - 1);
      }
      digits[i] = 0;
    }
  }
  return FactorTable(std::move(out_scope), std::move(out_dims), std::move(out));
}

FactorTable reduce(const FactorTable& f, const Evidence& evidence) {
  bool touched = false;
  for (int v : f.scope()) {
    if (evidence.count(v)) touched = true;
  }
  if (!touched) return f;

  const auto strides = strides_for(f);
  std::size_t offset = 0;
  std::vector<int> scope, dims;
  std::vector<std::size_t> kept_strides;
  for (std::size_t p = 0; p < f.scope().size(); ++p) {
    auto it = evidence.find(f.scope()[p]);
    if (it != evidence.end()) {
      offset += strides[p] * static_cast<std::size_t>(it->second);
    } else {
      scope.push_back(f.scope()[p]);
      dims.push_back(f.dims()[p]);
      kept_strides.push_back(strides[p]);
    }
  }
  std::vector<double> values;
  for (AssignmentCounter c(dims); !c.done(); c.next()) {
    std::size_t idx = offset;
    for (std::size_t p = 0; p < dims.size(); ++p) {
      idx += kept_strides[p] * static_cast<std::size_t>(c.values()[p]);
    }
    values.push_back(f.values()[idx]);
  }
  return FactorTable(std::move(scope), std::move(dims), std::move(values));
}

void validate_query(const FactorGraph& graph, const Evidence& evidence,
                    const std::vector<int>& targets) {
  const int n = static_cast<int>(graph.domain_sizes.size());
  for (const auto& [var, value] : evidence) {
    if (var < 0 || var >= n) throw std::invalid_argument("evidence references unknown variable");
    if (value < 0 || value >= graph.domain_sizes[var]) {
      throw std::invalid_argument("evidence value out of domain");
    }
  }
  std::vector<int> sorted = targets;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("query targets must be distinct");
  }
  for (int t : targets) {
    if (t < 0 || t >= n) throw std::invalid_argument("query target references unknown variable");
  }
}

// Greedy first-fit partition of a bucket into mini-buckets whose message
// scope (union scope minus the bucket variable) has at most `ibound` vars.
std::vector<std::vector<const FactorTable*>> partition_bucket(
    std::vector<const FactorTable*> bucket, int var, int ibound) {
  std::stable_sort(bucket.begin(), bucket.end(), [](const FactorTable* a, const FactorTable* b) {
    return a->scope().size() > b->scope().size();
  });
  std::vector<std::vector<const FactorTable*>> minis;
  std::vector<std::vector<int>> mini_scopes;
  for (const FactorTable* f : bucket) {
    bool placed = false;
    for (std::size_t m = 0; m < minis.size() && !placed; ++m) {
      std::vector<int> merged = mini_scopes[m];
      for (int v : f->scope()) {
        if (v != var && std::find(merged.begin(), merged.end(), v) == merged.end()) merged.push_back(v);
      }
      if (static_cast<int>(merged.size()) <= ibound) {
        minis[m].push_back(f);
        mini_scopes[m] = std::move(merged);
        placed = true;
      }
    }
    if (!placed) {
      std::vector<int> scope;
      for (int v : f->scope()) {
        if (v != var) scope.push_back(v);
      }
      minis.push_back({f});
      mini_scopes.push_back(std::move(scope));
    }
  }
  return minis;
}

Elimination eliminate(const FactorGraph& graph, const Evidence& evidence,
                      const std::vector<int>& targets, std::optional<int> ibound) {
  validate_query(graph, evidence, targets);
  const int n = static_cast<int>(graph.domain_sizes.size());

  Evidence reduce_evidence;
  std::vector<FactorTable> pool;
  for (const auto& [var, value] : evidence) {
    if (std::find(targets.begin(), targets.end(), var) != targets.end()) {
      std::vector<double> indicator(graph.domain_sizes[var], 0.0);
      indicator[value] = 1.0;
      pool.emplace_back(std::vector<int>{var}, std::vector<int>{graph.domain_sizes[var]},
                        std::move(indicator));
    } else {
      reduce_evidence[var] = value;
    }
  }

  Elimination result;
  for (const auto& f : graph.factors) {
    FactorTable r = reduce(f, reduce_evidence);
    if (r.scope().empty()) {
      const double v = r.values()[0];
      if (v <= 0.0) throw ZeroProbabilityEvidence("evidence has probability zero");
      result.log_scale += std::log(v);
    } else {
      pool.push_back(std::move(r));
    }
  }

  std::vector<std::vector<int>> scopes;
  for (const auto& f : pool) scopes.push_back(f.scope());
  std::set<int> keep(targets.begin(), targets.end());
  std::set<int> skip;
  for (const auto& [var, value] : reduce_evidence) skip.insert(var);
  const std::vector<int> order = min_fill_order(n, scopes, keep, skip);

  std::vector<bool> alive(pool.size(), true);
  for (int var : order) {
    std::vector<const FactorTable*> bucket;
    std::vector<std::size_t> bucket_ids;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (alive[i] && pool[i].contains(var)) {
        bucket.push_back(&pool[i]);
        bucket_ids.push_back(i);
      }
    }
    if (bucket.empty()) continue;

    std::vector<std::vector<const FactorTable*>> minis;
    if (ibound) {
      minis = partition_bucket(bucket, var, *ibound);
    } else {
      minis.push_back(bucket);
    }
    const double weight = 1.0 / static_cast<double>(minis.size());
    std::vector<FactorTable> messages;
    for (const auto& mini : minis) {
      FactorTable msg = combine(mini, graph.domain_sizes, var, weight);
      const double peak = msg.max();
      if (peak <= 0.0) throw ZeroProbabilityEvidence("evidence has probability zero");
      for (double& v : msg.mutable_values()) v /= peak;
      result.log_scale += std::log(peak);
      messages.push_back(std::move(msg));
    }
    for (std::size_t id : bucket_ids) alive[id] = false;
    for (auto& msg : messages) {
      if (msg.scope().empty()) continue;  // already folded into log_scale (value 1)
      pool.push_back(std::move(msg));
      alive.push_back(true);
    }
  }

  std::vector<const FactorTable*> rest;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (alive[i]) rest.push_back(&pool[i]);
  }
  FactorTable joint = combine(rest, graph.domain_sizes, -1, 1.0);

  // Re-express over `targets` in caller order.
  std::vector<int> dims;
  for (int t : targets) dims.push_back(graph.domain_sizes[t]);
  std::vector<double> values;
  std::vector<int> lookup(joint.scope().size());
  for (AssignmentCounter c(dims); !c.done(); c.next()) {
    for (std::size_t p = 0; p < joint.scope().size(); ++p) {
      auto pos = std::find(targets.begin(), targets.end(), joint.scope()[p]) - targets.begin();
      lookup[p] = c.values()[pos];
    }
    values.push_back(joint.at(lookup));
  }
  result.table = FactorTable(targets, std::move(dims), std::move(values));
  return result;
}

FactorTable normalized(Elimination e) {
  const double total = e.table.sum();
  if (!(total > 0.0)) throw ZeroProbabilityEvidence("evidence has probability zero");
  for (double& v : e.table.mutable_values()) v /= total;
  return std::move(e.table);
}

}  // namespace

std::vector<int> min_fill_order(int num_variables, const std::vector<std::vector<int>>& scopes,
                                const std::set<int>& keep, const std::set<int>& skip) {
  std::vector<std::set<int>> adj(num_variables);
  for (const auto& scope : scopes) {
    for (int a : scope) {
      for (int b : scope) {
        if (a != b && !skip.count(a) && !skip.count(b)) adj[a].insert(b);
      }
    }
  }
  std::vector<int> remaining;
  for (int v = 0; v < num_variables; ++v) {
    if (!keep.count(v) && !skip.count(v)) remaining.push_back(v);
  }

  std::vector<int> order;
  order.reserve(remaining.size());
  while (!remaining.empty()) {
    std::size_t best = 0;
    long best_fill = std::numeric_limits<long>::max();
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      const auto& nb = adj[remaining[i]];
      long fill = 0;
      for (auto a = nb.begin(); a != nb.end() && fill < best_fill; ++a) {
        for (auto b = std::next(a); b != nb.end(); ++b) {
          if (!adj[*a].count(*b)) ++fill;
        }
      }
      // remaining is sorted, so strict < keeps the lowest index on ties.
      if (fill < best_fill) {
        best_fill = fill;
        best = i;
      }
      if (best_fill == 0) break;
    }
    const int v = remaining[best];
    const std::vector<int> nb(adj[v].begin(), adj[v].end());
    for (std::size_t a = 0; a < nb.size(); ++a) {
      for (std::size_t b = a + 1; b < nb.size(); ++b) {
        adj[nb[a]].insert(nb[b]);
        adj[nb[b]].insert(nb[a]);
      }
      adj[nb[a]].erase(v);
    }
    adj[v].clear();
    order.push_back(v);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return order;
}

std::vector<int> elimination_order(const Network& network, const std::set<int>& keep) {
  const int n = static_cast<int>(network.size());
  for (int k : keep) {
    if (k < 0 || k >= n) throw std::invalid_argument("keep set references unknown variable");
  }
  std::vector<std::vector<int>> scopes;
  for (const auto& f : network.cpts()) scopes.push_back(f.scope());
  return min_fill_order(n, scopes, keep);
}

namespace {

template <typename Visit>
void simulate_elimination(const Network& network, const std::vector<int>& order, Visit visit) {
  const int n = static_cast<int>(network.size());
  std::vector<std::set<int>> adj(n);
  for (const auto& f : network.cpts()) {
    for (int a : f.scope()) {
      for (int b : f.scope()) {
        if (a != b) adj[a].insert(b);
      }
    }
  }
  for (int v : order) {
    if (v < 0 || v >= n) throw std::invalid_argument("order references unknown variable");
    const std::vector<int> nb(adj[v].begin(), adj[v].end());
    int fill = 0;
    for (std::size_t a = 0; a < nb.size(); ++a) {
      for (std::size_t b = a + 1; b < nb.size(); ++b) {
        if (adj[nb[a]].insert(nb[b]).second) ++fill;
        adj[nb[b]].insert(nb[a]);
      }
      adj[nb[a]].erase(v);
    }
    adj[v].clear();
    visit(fill, static_cast<int>(nb.size()));
  }
}

}  // namespace

std::vector<int> fill_edges_along(const Network& network, const std::vector<int>& order) {
  std::vector<int> fills;
  simulate_elimination(network, order, [&](int fill, int) { fills.push_back(fill); });
  return fills;
}

int induced_width(const Network& network, const std::vector<int>& order) {
  int width = 0;
  simulate_elimination(network, order, [&](int, int degree) { width = std::max(width, degree); });
  return width;
}

FactorTable query_marginal(const FactorGraph& graph, const Evidence& evidence,
                           const std::vector<int>& targets) {
  if (targets.empty()) throw std::invalid_argument("query needs at least one target");
  return normalized(eliminate(graph, evidence, targets, std::nullopt));
}

FactorTable query_marginal(const Network& network, const Evidence& evidence,
                           const std::vector<int>& targets) {
  return query_marginal(FactorGraph::from_network(network), evidence, targets);
}

FactorTable wmb_query(const FactorGraph& graph, const Evidence& evidence,
                      const std::vector<int>& targets, int ibound) {
  if (ibound < 1) throw std::invalid_argument("ibound must be at least 1");
  if (targets.empty()) throw std::invalid_argument("query needs at least one target");
  return normalized(eliminate(graph, evidence, targets, ibound));
}

FactorTable wmb_query(const Network& network, const Evidence& evidence,
                      const std::vector<int>& targets, int ibound) {
  return wmb_query(FactorGraph::from_network(network), evidence, targets, ibound);
}

double query_joint_assignment(const Network& network, const Evidence& assignment) {
  const int n = static_cast<int>(network.size());
  for (int v = 0; v < n; ++v) {
    auto it = assignment.find(v);
    if (it == assignment.end()) {
      throw std::invalid_argument("joint assignment misses variable '" + network.variable(v).id + "'");
    }
    if (it->second < 0 || it->second >= network.variable(v).domain_size) {
      throw std::invalid_argument("joint assignment value out of domain");
    }
  }
  if (static_cast<int>(assignment.size()) != n) {
    throw std::invalid_argument("joint assignment references unknown variables");
  }
  double p = 1.0;
  std::vector<int> values;
  for (const auto& f : network.cpts()) {
    values.clear();
    for (int v : f.scope()) values.push_back(assignment.at(v));
    p *= f.at(values);
  }
  return p;
}

double log_probability_of_evidence(const FactorGraph& graph, const Evidence& evidence) {
  try {
    Elimination e = eliminate(graph, evidence, {}, std::nullopt);
    const double v = e.table.values()[0];
    if (!(v > 0.0)) return -std::numeric_limits<double>::infinity();
    return std::log(v) + e.log_scale;
  } catch (const ZeroProbabilityEvidence&) {
    return -std::numeric_limits<double>::infinity();
  }
}

double log_probability_of_evidence(const Network& network, const Evidence& evidence) {
  return log_probability_of_evidence(FactorGraph::from_network(network), evidence);
}

}  // namespace sebn::bayes
