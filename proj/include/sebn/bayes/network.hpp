#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sebn::bayes {

enum class Layer { kUntagged, kEnvironment, kCompetency, kTarget };

std::string_view layer_name(Layer layer);
Layer parse_layer(std::string_view name);

struct DiscreteVariable {
  std::string id;
  int domain_size = 1;
  Layer layer = Layer::kUntagged;

  bool operator==(const DiscreteVariable&) const = default;
};

// Dense non-negative table over an ordered scope of variable indices.
// Row-major: the last scope variable varies fastest.
class FactorTable {
 public:
  FactorTable() = default;
  FactorTable(std::vector<int> scope, std::vector<int> dims, std::vector<double> values);

  // Scalar factor with empty scope.
  static FactorTable constant(double value);

  const std::vector<int>& scope() const { return scope_; }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  std::size_t size() const { return values_.size(); }
  bool contains(int var) const;
  // Position of `var` in the scope, or -1.
  int position_of(int var) const;

  // `assignment` is aligned with scope().
  std::size_t index_of(std::span<const int> assignment) const;
  double at(std::span<const int> assignment) const { return values_[index_of(assignment)]; }

  double sum() const;
  double max() const;

  bool operator==(const FactorTable&) const = default;

 private:
  std::vector<int> scope_;
  std::vector<int> dims_;
  std::vector<double> values_;
};

// Variable index -> value.
using Evidence = std::map<int, int>;

// Discrete Bayesian network: one conditional factor per variable, whose scope
// lists the parents followed by the child itself.
class Network {
 public:
  Network() = default;
  Network(std::vector<DiscreteVariable> variables, std::vector<FactorTable> cpts);

  std::size_t size() const { return variables_.size(); }
  const std::vector<DiscreteVariable>& variables() const { return variables_; }
  const DiscreteVariable& variable(int index) const { return variables_.at(index); }
  const std::vector<FactorTable>& cpts() const { return cpts_; }
  const FactorTable& cpt(int index) const { return cpts_.at(index); }
  std::vector<int> parents(int index) const;
  std::vector<int> domain_sizes() const;

  // Throws std::invalid_argument for unknown ids.
  int index_of(std::string_view id) const;
  std::optional<int> find(std::string_view id) const;

  std::vector<int> indices_in_layer(Layer layer) const;
  // Parents before children; ties by index.
  const std::vector<int>& topological_order() const { return topo_order_; }

  Evidence make_evidence(const std::vector<std::pair<std::string, int>>& assignments) const;

  bool operator==(const Network& other) const {
    return variables_ == other.variables_ && cpts_ == other.cpts_;
  }

 private:
  std::vector<DiscreteVariable> variables_;
  std::vector<FactorTable> cpts_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> topo_order_;
};

// Loose collection of factors over indexed variables. Used for models that are
// not a plain Network (e.g. several rollouts sharing latent variables).
struct FactorGraph {
  std::vector<int> domain_sizes;
  std::vector<FactorTable> factors;

  static FactorGraph from_network(const Network& network);
};

// Iterates all assignments of `dims` in row-major order (last fastest).
class AssignmentCounter {
 public:
  explicit AssignmentCounter(std::vector<int> dims);
  const std::vector<int>& values() const { return values_; }
  bool done() const { return done_; }
  // Returns the position of the most significant digit that changed.
  std::size_t next();

 private:
  std::vector<int> dims_;
  std::vector<int> values_;
  bool done_ = false;
};

// Ancestral sample of every variable; variables in `fixed` keep their value.
std::vector<int> forward_sample(const Network& network, const Evidence& fixed, std::mt19937_64& rng);

// Index drawn from an unnormalized weight vector with one uniform draw.
int sample_index(const std::vector<double>& weights, std::mt19937_64& rng);

}  // namespace sebn::bayes
