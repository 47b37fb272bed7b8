#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "sebn/bayes/network.hpp"

namespace sebn::bayes {

// Network document, version 1:
//   { "format": "sebn-network", "version": 1,
//     "variables": [ { "id": str, "domain_size": int, "layer": str } ... ],
//     "factors":   [ { "child": str, "scope": [str ...], "values": [num ...] } ... ] }
// "scope" lists parents then the child; "values" are row-major with the
// child varying fastest. One factor per variable, in variable order.
inline constexpr int kNetworkFormatVersion = 1;

nlohmann::json network_to_json(const Network& network);
Network network_from_json(const nlohmann::json& doc);

void save_network(const Network& network, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace sebn::bayes
