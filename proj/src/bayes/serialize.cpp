#include "sebn/bayes/serialize.hpp"

#include <fstream>
#include <stdexcept>

#include "sebn/errors.hpp"

namespace sebn::bayes {

nlohmann::json network_to_json(const Network& network) {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : network.variables()) {
    vars.push_back({{"id", v.id}, {"domain_size", v.domain_size}, {"layer", layer_name(v.layer)}});
  }
  nlohmann::json factors = nlohmann::json::array();
  for (std::size_t i = 0; i < network.size(); ++i) {
    const auto& f = network.cpt(static_cast<int>(i));
    nlohmann::json scope = nlohmann::json::array();
    for (int s : f.scope()) scope.push_back(network.variable(s).id);
    factors.push_back({{"child", network.variable(static_cast<int>(i)).id},
                       {"scope", scope},
                       {"values", f.values()}});
  }
  return {{"format", "sebn-network"},
          {"version", kNetworkFormatVersion},
          {"variables", vars},
          {"factors", factors}};
}

Network network_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "sebn-network") {
      throw ConfigurationError("not a sebn-network document");
    }
    if (doc.at("version").get<int>() != kNetworkFormatVersion) {
      throw ConfigurationError("unsupported network document version");
    }
    std::vector<DiscreteVariable> vars;
    std::unordered_map<std::string, int> index;
    for (const auto& v : doc.at("variables")) {
      DiscreteVariable var{v.at("id").get<std::string>(), v.at("domain_size").get<int>(),
                           parse_layer(v.value("layer", std::string("untagged")))};
      index.emplace(var.id, static_cast<int>(vars.size()));
      vars.push_back(std::move(var));
    }
    std::vector<FactorTable> cpts(vars.size());
    std::vector<bool> seen(vars.size(), false);
    for (const auto& f : doc.at("factors")) {
      const auto child = f.at("child").get<std::string>();
      auto it = index.find(child);
      if (it == index.end()) throw ConfigurationError("factor for unknown variable '" + child + "'");
      std::vector<int> scope, dims;
      for (const auto& s : f.at("scope")) {
        auto sit = index.find(s.get<std::string>());
        if (sit == index.end()) {
          throw ConfigurationError("factor scope names unknown variable '" + s.get<std::string>() + "'");
        }
        scope.push_back(sit->second);
        dims.push_back(vars[sit->second].domain_size);
      }
      if (seen[it->second]) throw ConfigurationError("duplicate factor for '" + child + "'");
      seen[it->second] = true;
      cpts[it->second] = FactorTable(std::move(scope), std::move(dims),
                                     f.at("values").get<std::vector<double>>());
    }
    return Network(std::move(vars), std::move(cpts));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("malformed network document: ") + e.what());
  }
}

void save_network(const Network& network, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << network_to_json(network).dump(2) << '\n';
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return network_from_json(nlohmann::json::parse(in));
}

}  // namespace sebn::bayes
