#pragma once

#include <optional>
#include <set>
#include <vector>

#include "sebn/bayes/network.hpp"

namespace sebn::bayes {

// Min-fill elimination ordering over every variable not in `keep`. Ties are
// broken by variable index, so the result is deterministic.
std::vector<int> elimination_order(const Network& network, const std::set<int>& keep);

// Same heuristic over the interaction graph of arbitrary factor scopes.
// Variables in `skip` are neither eliminated nor connected.
std::vector<int> min_fill_order(int num_variables, const std::vector<std::vector<int>>& scopes,
                                const std::set<int>& keep, const std::set<int>& skip = {});

// Number of fill edges each step of `order` would add, simulated on the
// moralized graph.
std::vector<int> fill_edges_along(const Network& network, const std::vector<int>& order);

// Largest message scope produced when eliminating in `order`.
int induced_width(const Network& network, const std::vector<int>& order);

// Exact P(targets | evidence) by bucket elimination. The result's scope is
// `targets` in the order given. Targets that are also evidence come back as a
// point mass on the evidenced value.
FactorTable query_marginal(const Network& network, const Evidence& evidence,
                           const std::vector<int>& targets);
FactorTable query_marginal(const FactorGraph& graph, const Evidence& evidence,
                           const std::vector<int>& targets);

// Weighted mini-bucket approximation of query_marginal. A bucket is split
// when its message would span more than `ibound` variables; split buckets
// use uniform Hölder weights.
FactorTable wmb_query(const Network& network, const Evidence& evidence,
                      const std::vector<int>& targets, int ibound);
FactorTable wmb_query(const FactorGraph& graph, const Evidence& evidence,
                      const std::vector<int>& targets, int ibound);

// Chain-rule product of the conditional factors at a full assignment.
double query_joint_assignment(const Network& network, const Evidence& assignment);

// log P(evidence). Returns -infinity when the evidence is impossible.
double log_probability_of_evidence(const Network& network, const Evidence& evidence);
double log_probability_of_evidence(const FactorGraph& graph, const Evidence& evidence);

}  // namespace sebn::bayes
