#include "sebn/search/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>

#include "sebn/bayes/inference.hpp"

namespace sebn::search {

namespace {

void check_same_structure(const bayes::Network& a, const bayes::Network& b) {
  if (a.variables() != b.variables()) throw std::invalid_argument("networks have different variables");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.cpt(i).scope() != b.cpt(i).scope() || a.cpt(i).dims() != b.cpt(i).dims()) {
      throw std::invalid_argument("networks have different structure at " + a.variable(i).id);
    }
  }
}

int default_target(const bayes::Network& net, std::optional<int> target) {
  if (target) {
    if (*target < 0 || *target >= static_cast<int>(net.size())) throw std::invalid_argument("target out of range");
    return *target;
  }
  const auto targets = net.indices_in_layer(bayes::Layer::kTarget);
  if (targets.empty()) throw std::invalid_argument("network has no target variable");
  return targets.back();
}

bool better(Mode mode, double a, double b) { return mode == Mode::kMax ? a > b : a < b; }

struct Node {
  std::vector<int> prefix;  // values of ordering[0..depth)
  double priority = 0.0;
  std::size_t seq = 0;
};

}  // namespace

Mode parse_mode(const std::string& text) {
  if (text == "max") return Mode::kMax;
  if (text == "min") return Mode::kMin;
  throw std::invalid_argument("unknown search mode '" + text + "'");
}

std::string mode_name(Mode mode) { return mode == Mode::kMax ? "max" : "min"; }

double heuristic_formula(double p_prev, double p_next) {
  const double a = std::max(p_prev, kProbabilityFloor);
  const double b = std::max(p_next, kProbabilityFloor);
  return std::abs(std::log(a) - std::log(b)) * b;
}

NodeScorer::NodeScorer(const bayes::Network& prev, const bayes::Network& next, int target, int ibound)
    : prev_(prev), next_(next), target_(target), ibound_(ibound) {
  check_same_structure(prev, next);
  if (target < 0 || target >= static_cast<int>(prev.size()) || prev.variable(target).domain_size != 2) {
    throw std::invalid_argument("heuristic target must be a binary variable");
  }
  if (ibound < 1) throw std::invalid_argument("ibound must be >= 1");
  exact_ = bayes::induced_width(prev, bayes::elimination_order(prev, {target})) <= ibound;
}

HeuristicValue NodeScorer::score(const bayes::Evidence& partial) const {
  auto query = [&](const bayes::Network& net) {
    const auto m = exact_ ? bayes::query_marginal(net, partial, {target_})
                          : bayes::wmb_query(net, partial, {target_}, ibound_);
    return m.values()[1];
  };
  HeuristicValue h;
  h.p_prev = query(prev_);
  h.p_next = query(next_);
  h.value = heuristic_formula(h.p_prev, h.p_next);
  return h;
}

HeuristicValue node_heuristic(const bayes::Network& prev, const bayes::Network& next,
                              const bayes::Evidence& partial, int target, int ibound) {
  return NodeScorer(prev, next, target, ibound).score(partial);
}

CandidateSet select_candidates(const bayes::Network& prev, const bayes::Network& next, const SearchConfig& config) {
  if (config.expansions < 1) throw std::invalid_argument("expansions must be >= 1");
  if (config.n < 1) throw std::invalid_argument("n must be >= 1");
  const NodeScorer scorer(prev, next, default_target(prev, config.target), config.ibound);

  const auto env_vars = prev.indices_in_layer(bayes::Layer::kEnvironment);
  std::vector<int> ordering = config.ordering.empty() ? env_vars : config.ordering;
  {
    std::vector<int> a = ordering, b = env_vars;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw std::invalid_argument("ordering must be a permutation of the environment variables");
  }
  const std::size_t depth_max = ordering.size();
  auto evidence_of = [&](const std::vector<int>& prefix) {
    bayes::Evidence ev;
    for (std::size_t k = 0; k < prefix.size(); ++k) ev[ordering[k]] = prefix[k];
    return ev;
  };

  const Mode mode = config.mode;
  auto worse = [mode](const Node& a, const Node& b) {
    if (a.priority != b.priority) return better(mode, b.priority, a.priority);
    return a.seq > b.seq;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> open(worse);
  std::vector<Node> leaves;
  std::size_t seq = 0;
  CandidateSet out;

  Node root{{}, scorer.score({}).value, seq++};
  if (depth_max == 0) {
    leaves.push_back(root);
  } else {
    open.push(root);
  }
  while (out.expansions < config.expansions && !open.empty()) {
    const Node node = open.top();
    open.pop();
    ++out.expansions;
    const int var = ordering[node.prefix.size()];
    for (int value = 0; value < prev.variable(var).domain_size; ++value) {
      Node child{node.prefix, 0.0, seq++};
      child.prefix.push_back(value);
      child.priority = scorer.score(evidence_of(child.prefix)).value;
      ++out.generated;
      if (child.prefix.size() == depth_max) {
        leaves.push_back(std::move(child));
      } else {
        open.push(std::move(child));
      }
    }
  }
  std::vector<Node> frontier = std::move(leaves);
  while (!open.empty()) {
    frontier.push_back(open.top());
    open.pop();
  }
  out.frontier = frontier.size();
  if (frontier.empty()) throw std::invalid_argument("search frontier is empty");
  std::stable_sort(frontier.begin(), frontier.end(), [mode](const Node& a, const Node& b) {
    if (a.priority != b.priority) return better(mode, a.priority, b.priority);
    return a.prefix < b.prefix;
  });

  std::mt19937_64 rng(config.seed);
  std::set<std::vector<int>> taken;
  for (const Node& node : frontier) {
    if (static_cast<int>(out.candidates.size()) >= config.n) break;
    const bayes::Evidence fixed = evidence_of(node.prefix);
    std::vector<int> env;
    bool fresh = false;
    for (int attempt = 0; attempt <= 10 && !fresh; ++attempt) {
      if (attempt > 0) ++out.duplicate_resamples;
      const auto sample = bayes::forward_sample(next, fixed, rng);
      env.clear();
      for (int v : env_vars) env.push_back(sample[v]);
      fresh = !taken.count(env);
      if (node.prefix.size() == depth_max) break;
    }
    if (!fresh) continue;
    taken.insert(env);
    bayes::Evidence full;
    for (std::size_t k = 0; k < env_vars.size(); ++k) full[env_vars[k]] = env[k];
    out.candidates.push_back({env, scorer.score(full)});
  }
  return out;
}

CandidateSet exhaustive_rank(const bayes::Network& prev, const bayes::Network& next,
                             const std::vector<std::vector<int>>& env_space, int n, Mode mode,
                             std::optional<int> target, std::size_t threshold, int ibound) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (env_space.size() > threshold) {
    throw std::invalid_argument("environment space of " + std::to_string(env_space.size()) +
                                " configurations exceeds the exhaustive threshold; use select_candidates");
  }
  const NodeScorer scorer(prev, next, default_target(prev, target), ibound);
  const auto env_vars = prev.indices_in_layer(bayes::Layer::kEnvironment);
  CandidateSet out;
  std::set<std::vector<int>> seen;
  for (const auto& env : env_space) {
    if (env.size() != env_vars.size()) throw std::invalid_argument("configuration length mismatch");
    if (!seen.insert(env).second) continue;
    bayes::Evidence full;
    for (std::size_t k = 0; k < env_vars.size(); ++k) full[env_vars[k]] = env[k];
    out.candidates.push_back({env, scorer.score(full)});
  }
  std::sort(out.candidates.begin(), out.candidates.end(), [mode](const Candidate& a, const Candidate& b) {
    if (a.heuristic.value != b.heuristic.value) return better(mode, a.heuristic.value, b.heuristic.value);
    return a.env < b.env;
  });
  if (out.candidates.size() > static_cast<std::size_t>(n)) out.candidates.resize(n);
  out.frontier = out.candidates.size();
  return out;
}

nlohmann::json candidates_to_json(const bayes::Network& network, const CandidateSet& set) {
  const auto env_vars = network.indices_in_layer(bayes::Layer::kEnvironment);
  auto list = nlohmann::json::array();
  for (const auto& c : set.candidates) {
    nlohmann::json env = nlohmann::json::object();
    for (std::size_t k = 0; k < env_vars.size(); ++k) env[network.variable(env_vars[k]).id] = c.env[k];
    list.push_back({{"env", env},
                    {"heuristic", c.heuristic.value},
                    {"p_prev", c.heuristic.p_prev},
                    {"p_next", c.heuristic.p_next}});
  }
  return list;
}

}  // namespace sebn::search
