#include "sebn/model/spec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sebn/errors.hpp"

namespace sebn::model {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string first_token(std::string_view s) {
  s = trim(s);
  std::size_t end = 0;
  while (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end]))) ++end;
  return std::string(s.substr(0, end));
}

// "open door" -> "open_door"; rejects anything that is not an identifier.
std::string identifier(std::string_view raw, std::size_t line) {
  raw = trim(raw);
  std::string out;
  bool pending_space = false;
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back('_');
    pending_space = false;
    out.push_back(c);
  }
  const bool ok = !out.empty() && (std::isalpha(static_cast<unsigned char>(out[0])) || out[0] == '_') &&
                  std::all_of(out.begin(), out.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
                  });
  if (!ok) throw ParseError(line, std::string(raw), "expected an identifier");
  return out;
}

int non_negative_int(std::string_view raw, std::size_t line) {
  raw = trim(raw);
  int value = -1;
  auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
  if (raw.empty() || ec != std::errc() || ptr != raw.data() + raw.size() || value < 0) {
    throw ParseError(line, std::string(raw), "expected a non-negative integer");
  }
  return value;
}

std::vector<Condition> parse_conditions(std::string_view side, std::size_t line) {
  std::vector<Condition> out;
  if (trim(side).empty()) return out;
  std::size_t start = 0;
  while (start <= side.size()) {
    std::size_t comma = side.find(',', start);
    std::string_view item = side.substr(start, comma == std::string_view::npos ? side.npos : comma - start);
    auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ParseError(line, std::string(trim(item)), "expected name=level");
    out.push_back({identifier(item.substr(0, eq), line), non_negative_int(item.substr(eq + 1), line)});
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

RequirementLine parse_line(std::string_view text, std::size_t line) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ParseError(line, first_token(text), "expected ':'");
  RequirementLine out;
  out.target = identifier(text.substr(0, colon), line);
  std::string_view body = trim(text.substr(colon + 1));
  if (body.empty() || body.front() != '(') throw ParseError(line, first_token(body), "expected '('");
  if (body.back() != ')') throw ParseError(line, first_token(body.substr(body.rfind(')') + 1)), "expected ')' at end of line");
  body = body.substr(1, body.size() - 2);
  if (body.find_first_of("()") != std::string_view::npos) {
    throw ParseError(line, std::string(1, body[body.find_first_of("()")]), "unexpected parenthesis");
  }
  auto bar = body.find('|');
  if (bar == std::string_view::npos) throw ParseError(line, std::string(trim(body)), "expected '|'");
  if (body.find('|', bar + 1) != std::string_view::npos) throw ParseError(line, "|", "more than one '|'");
  out.env_conditions = parse_conditions(body.substr(0, bar), line);
  out.requirements = parse_conditions(body.substr(bar + 1), line);
  return out;
}

struct LogicalLine {
  std::size_t number;
  std::string text;
};

// Strips comments and joins lines whose parenthesis is still open.
std::vector<LogicalLine> logical_lines(std::string_view text) {
  std::vector<LogicalLine> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t number = 0;
  bool open = false;
  while (std::getline(in, raw)) {
    ++number;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::string_view t = trim(raw);
    if (t.empty()) continue;
    if (open) {
      out.back().text += ' ';
      out.back().text += t;
    } else {
      out.push_back({number, std::string(t)});
    }
    const auto& whole = out.back().text;
    open = whole.find('(') != std::string::npos && whole.find(')') == std::string::npos;
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

int SebnSpec::index_of(std::string_view id) const {
  int i = 0;
  for (const auto& v : env_vars) {
    if (v.id == id) return i;
    ++i;
  }
  for (const auto& v : competency_vars) {
    if (v.id == id) return i;
    ++i;
  }
  for (const auto& t : target_vars) {
    if (t == id) return i;
    ++i;
  }
  throw std::invalid_argument("unknown variable id '" + std::string(id) + "'");
}

const std::string& SebnSpec::id_at(int index) const {
  if (index < 0) throw std::out_of_range("negative variable index");
  auto i = static_cast<std::size_t>(index);
  if (i < env_vars.size()) return env_vars[i].id;
  i -= env_vars.size();
  if (i < competency_vars.size()) return competency_vars[i].id;
  i -= competency_vars.size();
  return target_vars.at(i);
}

bool SebnSpec::has(std::string_view id) const { return is_env(id) || is_competency(id) || is_target(id); }

int SebnSpec::domain_size(std::string_view id) const {
  for (const auto& v : env_vars) {
    if (v.id == id) return v.domain_size;
  }
  for (const auto& v : competency_vars) {
    if (v.id == id) return v.domain_size;
  }
  if (is_target(id)) return 2;
  throw std::invalid_argument("unknown variable id '" + std::string(id) + "'");
}

bool SebnSpec::is_env(std::string_view id) const {
  return std::any_of(env_vars.begin(), env_vars.end(), [&](const EnvVar& v) { return v.id == id; });
}

bool SebnSpec::is_competency(std::string_view id) const {
  return std::any_of(competency_vars.begin(), competency_vars.end(),
                     [&](const CompetencyVar& v) { return v.id == id; });
}

bool SebnSpec::is_target(std::string_view id) const {
  return std::find(target_vars.begin(), target_vars.end(), id) != target_vars.end();
}

std::vector<std::string> SebnSpec::base_competencies() const {
  std::vector<std::string> out;
  for (const auto& c : competency_vars) {
    if (c.is_base) out.push_back(c.id);
  }
  return out;
}

std::size_t SebnSpec::env_space_size() const {
  std::size_t n = 1;
  for (const auto& v : env_vars) n *= static_cast<std::size_t>(v.domain_size);
  return n;
}

std::vector<RequirementLine> parse_requirements(std::string_view text) {
  std::vector<RequirementLine> out;
  for (const auto& line : logical_lines(text)) {
    if (line.text.front() == '@') continue;
    out.push_back(parse_line(line.text, line.number));
  }
  return out;
}

SebnSpec parse_spec(std::string_view text) {
  SebnSpec spec;
  for (const auto& line : logical_lines(text)) {
    if (line.text.front() != '@') {
      spec.requirement_lines.push_back(parse_line(line.text, line.number));
      continue;
    }
    std::istringstream words(line.text.substr(1));
    std::string directive;
    words >> directive;
    std::vector<std::string> args;
    for (std::string w; words >> w;) args.push_back(w);
    auto need = [&](std::size_t n) {
      if (args.size() != n) throw ParseError(line.number, directive, "wrong number of arguments");
    };
    auto real = [&](const std::string& s) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(line.number, s, "expected a number");
      }
      return v;
    };
    if (directive == "lambda") {
      need(1);
      spec.lambda = real(args[0]);
    } else if (directive == "env") {
      need(2);
      spec.env_vars.push_back({identifier(args[0], line.number), non_negative_int(args[1], line.number)});
    } else if (directive == "competency") {
      need(2);
      spec.competency_vars.push_back(
          {identifier(args[0], line.number), non_negative_int(args[1], line.number), true});
    } else if (directive == "target") {
      need(1);
      spec.target_vars.push_back(identifier(args[0], line.number));
    } else if (directive == "terminal") {
      need(1);
      spec.terminal_target = identifier(args[0], line.number);
    } else if (directive == "phi") {
      if (args.size() < 2) throw ParseError(line.number, directive, "wrong number of arguments");
      std::vector<double> probs;
      for (std::size_t i = 1; i < args.size(); ++i) probs.push_back(real(args[i]));
      spec.phi_base[identifier(args[0], line.number)] = std::move(probs);
    } else {
      throw ParseError(line.number, "@" + directive, "unknown directive");
    }
  }
  std::set<std::string> line_targets;
  for (const auto& l : spec.requirement_lines) line_targets.insert(l.target);
  for (auto& c : spec.competency_vars) c.is_base = !line_targets.count(c.id);
  for (const auto& c : spec.competency_vars) {
    if (c.is_base && !spec.phi_base.count(c.id) && c.domain_size > 0) {
      spec.phi_base[c.id] = std::vector<double>(c.domain_size, 1.0 / c.domain_size);
    }
  }
  if (spec.terminal_target.empty() && !spec.target_vars.empty()) {
    spec.terminal_target = spec.target_vars.back();
  }
  validate_spec(spec);
  return spec;
}

SebnSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read spec file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_spec(buffer.str());
}

std::string format_requirement(const RequirementLine& line) {
  std::string out = line.target + " : (";
  auto side = [&](const std::vector<Condition>& conds) {
    for (std::size_t i = 0; i < conds.size(); ++i) {
      if (i) out += ", ";
      out += conds[i].variable + "=" + std::to_string(conds[i].value);
    }
  };
  side(line.env_conditions);
  out += " | ";
  side(line.requirements);
  out += ")";
  return out;
}

std::string format_spec(const SebnSpec& spec) {
  std::string out;
  out += "@lambda " + format_double(spec.lambda) + "\n";
  for (const auto& v : spec.env_vars) out += "@env " + v.id + " " + std::to_string(v.domain_size) + "\n";
  for (const auto& c : spec.competency_vars) {
    out += "@competency " + c.id + " " + std::to_string(c.domain_size) + "\n";
  }
  for (const auto& t : spec.target_vars) out += "@target " + t + "\n";
  out += "@terminal " + spec.terminal_target + "\n";
  for (const auto& [id, probs] : spec.phi_base) {
    out += "@phi " + id;
    for (double p : probs) out += " " + format_double(p);
    out += "\n";
  }
  for (const auto& l : spec.requirement_lines) out += format_requirement(l) + "\n";
  return out;
}

void validate_phi(const SebnSpec& spec, const Phi& phi) {
  for (const auto& c : spec.competency_vars) {
    if (!c.is_base) continue;
    auto it = phi.find(c.id);
    if (it == phi.end()) throw ConfigurationError("missing phi for base competency '" + c.id + "'");
    if (static_cast<int>(it->second.size()) != c.domain_size) {
      throw ConfigurationError("phi for '" + c.id + "' has wrong length");
    }
    double total = 0.0;
    for (double p : it->second) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw ConfigurationError("phi for '" + c.id + "' has a negative entry");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigurationError("phi for '" + c.id + "' does not sum to 1");
  }
  for (const auto& [id, probs] : phi) {
    if (!spec.is_competency(id)) throw ConfigurationError("phi given for unknown competency '" + id + "'");
    auto c = std::find_if(spec.competency_vars.begin(), spec.competency_vars.end(),
                          [&](const CompetencyVar& v) { return v.id == id; });
    if (!c->is_base) throw ConfigurationError("phi given for non-base competency '" + id + "'");
  }
}

void validate_spec(const SebnSpec& spec) {
  std::set<std::string> ids;
  auto declare = [&](const std::string& id, int size) {
    if (!ids.insert(id).second) throw ConfigurationError("duplicate variable id '" + id + "'");
    if (size < 1) throw ConfigurationError("variable '" + id + "' needs a positive domain size");
  };
  for (const auto& v : spec.env_vars) declare(v.id, v.domain_size);
  for (const auto& c : spec.competency_vars) declare(c.id, c.domain_size);
  for (const auto& t : spec.target_vars) declare(t, 2);
  if (spec.target_vars.empty()) throw ConfigurationError("spec declares no target variables");
  if (!(spec.lambda >= 0.0 && spec.lambda < 0.5)) throw ConfigurationError("lambda must lie in [0, 0.5)");
  if (!spec.is_target(spec.terminal_target)) {
    throw ConfigurationError("terminal target '" + spec.terminal_target + "' is not a declared target");
  }

  std::set<std::string> line_targets;
  for (const auto& l : spec.requirement_lines) {
    line_targets.insert(l.target);
    const bool competency_target = spec.is_competency(l.target);
    if (!spec.is_target(l.target) && !competency_target) {
      throw ConfigurationError("requirement line for undeclared target '" + l.target + "'");
    }
    if (competency_target && spec.domain_size(l.target) != 2) {
      throw ConfigurationError("derived competency '" + l.target + "' must be binary");
    }
    for (const auto& c : l.env_conditions) {
      if (!spec.is_env(c.variable)) {
        throw ConfigurationError("'" + c.variable + "' in an environment condition is not an environment feature");
      }
      if (c.value >= spec.domain_size(c.variable)) {
        throw ConfigurationError("condition " + c.variable + "=" + std::to_string(c.value) + " is out of domain");
      }
    }
    for (const auto& r : l.requirements) {
      if (!spec.is_competency(r.variable) && !spec.is_target(r.variable)) {
        throw ConfigurationError("requirement on '" + r.variable + "' which is not a competency or target");
      }
      if (r.value >= spec.domain_size(r.variable)) {
        throw ConfigurationError("requirement " + r.variable + "=" + std::to_string(r.value) + " is out of domain");
      }
      if (r.variable == l.target) throw CycleError("'" + l.target + "' requires itself");
    }
  }
  for (const auto& c : spec.competency_vars) {
    if (c.is_base == static_cast<bool>(line_targets.count(c.id))) {
      throw ConfigurationError("competency '" + c.id + "' base flag disagrees with its requirement lines");
    }
  }
  validate_phi(spec, spec.phi_base);
}

Phi uniform_phi(const SebnSpec& spec) {
  Phi phi;
  for (const auto& c : spec.competency_vars) {
    if (c.is_base) phi[c.id] = std::vector<double>(c.domain_size, 1.0 / c.domain_size);
  }
  return phi;
}

nlohmann::json spec_to_json(const SebnSpec& spec) {
  nlohmann::json env = nlohmann::json::array(), comps = nlohmann::json::array(), lines = nlohmann::json::array();
  for (const auto& v : spec.env_vars) env.push_back({{"id", v.id}, {"domain_size", v.domain_size}});
  for (const auto& c : spec.competency_vars) {
    comps.push_back({{"id", c.id}, {"domain_size", c.domain_size}, {"base", c.is_base}});
  }
  auto pairs = [](const std::vector<Condition>& conds) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : conds) out.push_back({c.variable, c.value});
    return out;
  };
  for (const auto& l : spec.requirement_lines) {
    lines.push_back({{"target", l.target}, {"env", pairs(l.env_conditions)}, {"requires", pairs(l.requirements)}});
  }
  return {{"format", "sebn-model"}, {"version", 1},           {"lambda", spec.lambda},
          {"terminal", spec.terminal_target}, {"env", env}, {"competencies", comps},
          {"targets", spec.target_vars},      {"lines", lines}, {"phi", spec.phi_base}};
}

SebnSpec spec_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "sebn-model" || doc.at("version").get<int>() != 1) {
      throw ConfigurationError("not a version 1 sebn-model document");
    }
    SebnSpec spec;
    spec.lambda = doc.at("lambda").get<double>();
    spec.terminal_target = doc.at("terminal").get<std::string>();
    for (const auto& v : doc.at("env")) spec.env_vars.push_back({v.at("id"), v.at("domain_size")});
    for (const auto& c : doc.at("competencies")) {
      spec.competency_vars.push_back({c.at("id"), c.at("domain_size"), c.at("base")});
    }
    spec.target_vars = doc.at("targets").get<std::vector<std::string>>();
    auto conds = [](const nlohmann::json& arr) {
      std::vector<Condition> out;
      for (const auto& p : arr) out.push_back({p.at(0).get<std::string>(), p.at(1).get<int>()});
      return out;
    };
    for (const auto& l : doc.at("lines")) {
      spec.requirement_lines.push_back({l.at("target"), conds(l.at("env")), conds(l.at("requires"))});
    }
    spec.phi_base = doc.at("phi").get<Phi>();
    validate_spec(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("malformed sebn-model document: ") + e.what());
  }
}

}  // namespace sebn::model
