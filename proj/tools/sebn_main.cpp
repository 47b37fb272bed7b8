#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sebn/bayes/inference.hpp"
#include "sebn/curriculum/grid_runner.hpp"
#include "sebn/errors.hpp"
#include "sebn/estimate/em.hpp"
#include "sebn/grid/megagrid.hpp"
#include "sebn/harness/experiment.hpp"
#include "sebn/search/candidates.hpp"

using namespace sebn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigurationError(path.string() + ": " + e.what());
  }
}

model::Phi read_phi(const model::SebnSpec& spec, const fs::path& path) {
  json doc = read_json(path);
  if (doc.contains("phi")) doc = doc["phi"];
  auto phi = doc.get<model::Phi>();
  model::validate_phi(spec, phi);
  return phi;
}

std::vector<model::RolloutRecord> read_rollouts(const model::SebnSpec& spec, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read " + path.string());
  std::vector<model::RolloutRecord> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(model::record_from_json(spec, json::parse(line)));
    } catch (const json::exception& e) {
      throw ConfigurationError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::pair<std::string, int>> parse_assignments(const std::vector<std::string>& items) {
  std::vector<std::pair<std::string, int>> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected name=value, got '" + item + "'");
    out.emplace_back(item.substr(0, eq), std::stoi(item.substr(eq + 1)));
  }
  return out;
}

void emit(const json& doc, const std::string& out) {
  if (out.empty()) {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << doc.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SEBN curriculum toolkit"};
  app.require_subcommand(1);

  std::string spec_path, phi_path, out, rollouts_path, prev_path, next_path, config_path, policy_path, run_dir;
  std::vector<std::string> evidence, targets, variants;
  std::vector<std::uint64_t> seeds;
  int ibound = 0, n = 20, expansions = 64, restarts = 4, max_iterations = 200, episodes = 100, size = 10;
  int generations = 0, jobs = -1, eval_interval = 0, eval_episodes = 0;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
  std::string mode = "max";
  std::vector<int> descriptor = {0, 1, 1};
  bool exhaustive = false;

  auto* infer = app.add_subcommand("infer", "Query an SEBN");
  infer->add_option("--spec", spec_path, "SEBN spec file")->required()->check(CLI::ExistingFile);
  infer->add_option("--phi", phi_path, "JSON phi (defaults to the spec's)")->check(CLI::ExistingFile);
  infer->add_option("--evidence,-e", evidence, "name=value evidence");
  infer->add_option("--target,-t", targets, "query variables (default: terminal target)");
  infer->add_option("--ibound", ibound, "use weighted mini-buckets with this ibound");
  infer->add_option("--rollouts", rollouts_path, "JSONL log; prints competency posteriors")->check(CLI::ExistingFile);
  infer->add_option("--out,-o", out, "output file (stdout when omitted)");

  auto* estimate = app.add_subcommand("estimate", "Maximum-likelihood phi from a rollout log");
  estimate->add_option("--spec", spec_path, "SEBN spec file")->required()->check(CLI::ExistingFile);
  estimate->add_option("--rollouts", rollouts_path, "JSONL rollout log")->required()->check(CLI::ExistingFile);
  estimate->add_option("--restarts", restarts, "random restarts");
  estimate->add_option("--tolerance", tolerance, "log-likelihood tolerance");
  estimate->add_option("--max-iterations", max_iterations, "EM iteration cap");
  estimate->add_option("--seed", seed, "restart seed");
  estimate->add_option("--out,-o", out, "output file (stdout when omitted)");

  auto* candidates = app.add_subcommand("candidates", "Candidate environments for a pair of phi estimates");
  candidates->add_option("--spec", spec_path, "SEBN spec file")->required()->check(CLI::ExistingFile);
  candidates->add_option("--prev", prev_path, "previous phi")->required()->check(CLI::ExistingFile);
  candidates->add_option("--next", next_path, "new phi")->required()->check(CLI::ExistingFile);
  candidates->add_option("-n", n, "number of candidates");
  candidates->add_option("--expansions", expansions, "search expansions");
  candidates->add_option("--mode", mode, "max or min")->check(CLI::IsMember({"max", "min"}));
  candidates->add_option("--seed", seed, "leaf completion seed");
  candidates->add_option("--ibound", ibound, "mini-bucket ibound (default 20)");
  candidates->add_flag("--exhaustive", exhaustive, "score the whole design space instead");
  candidates->add_option("--out,-o", out, "output file (stdout when omitted)");

  auto* run = app.add_subcommand("run", "Run curriculum experiments");
  run->add_option("--config,-c", config_path, "experiment JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--variant", variants, "override the variant; repeat for several");
  run->add_option("--seeds", seeds, "override the seed list");
  run->add_option("--generations", generations, "override generations");
  run->add_option("--out,-o", out, "override the output directory");
  run->add_option("--jobs,-j", jobs, "parallel seeds (0 = all cores)");
  run->add_option("--eval-interval", eval_interval, "override the eval interval");
  run->add_option("--eval-episodes", eval_episodes, "override eval episodes");

  auto* eval = app.add_subcommand("eval", "Greedy success rate of a saved policy");
  eval->add_option("--policy", policy_path, "policy.json from a run")->required()->check(CLI::ExistingFile);
  eval->add_option("--descriptor", descriptor, "DoorKey D W L")->expected(3);
  eval->add_option("--episodes", episodes, "episodes");
  eval->add_option("--size", size, "grid width and height");
  eval->add_option("--seed", seed, "instance seed");

  auto* plot = app.add_subcommand("plot-data", "Long-format CSV of eval checkpoints");
  plot->add_option("--run-dir", run_dir, "experiment output directory")->required();
  plot->add_option("--out,-o", out, "CSV path (default <run-dir>/plot_data.csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*infer) {
      const auto spec = model::load_spec(spec_path);
      const auto phi = phi_path.empty() ? spec.phi_base : read_phi(spec, phi_path);
      const auto net = model::assemble_sebn(spec, phi);
      if (!rollouts_path.empty()) {
        emit(json(model::competency_posterior(net, read_rollouts(spec, rollouts_path))), out);
        return 0;
      }
      if (targets.empty()) targets = {spec.terminal_target};
      const auto ev = net.make_evidence(parse_assignments(evidence));
      json doc = json::object();
      for (const auto& t : targets) {
        const int v = net.index_of(t);
        doc[t] = (ibound > 0 ? bayes::wmb_query(net, ev, {v}, ibound) : bayes::query_marginal(net, ev, {v})).values();
      }
      emit(doc, out);
    } else if (*estimate) {
      const auto spec = model::load_spec(spec_path);
      estimate::EmConfig config;
      config.restarts = restarts;
      config.tolerance = tolerance;
      config.max_iterations = max_iterations;
      config.seed = seed;
      const auto est = estimate::estimate_phi(spec, read_rollouts(spec, rollouts_path), config);
      emit({{"phi", est.phi},
            {"log_likelihood", est.log_likelihood},
            {"iterations", est.iterations},
            {"converged", est.converged},
            {"unidentified", est.unidentified},
            {"zero_probability_records", est.zero_probability_records},
            {"restart_index", est.restart_index},
            {"trace", est.trace}},
           out);
    } else if (*candidates) {
      const auto spec = model::load_spec(spec_path);
      const auto prev = model::assemble_sebn(spec, read_phi(spec, prev_path));
      const auto next = model::assemble_sebn(spec, read_phi(spec, next_path));
      const int target = spec.index_of(spec.terminal_target);
      const int bound = ibound > 0 ? ibound : 20;
      search::CandidateSet set;
      if (exhaustive) {
        set = search::exhaustive_rank(prev, next, model::enumerate_env_space(spec), n, search::parse_mode(mode), target,
                                      spec.env_space_size(), bound);
      } else {
        search::SearchConfig config;
        config.expansions = expansions;
        config.n = n;
        config.mode = search::parse_mode(mode);
        config.seed = seed;
        config.ibound = bound;
        config.target = target;
        set = search::select_candidates(prev, next, config);
      }
      emit(search::candidates_to_json(prev, set), out);
    } else if (*run) {
      auto config = harness::load_config(config_path);
      if (!seeds.empty()) config.seeds = seeds;
      if (generations > 0) config.generations = generations;
      if (!out.empty()) config.output = out;
      if (jobs >= 0) config.jobs = jobs;
      if (eval_interval > 0) config.eval_interval = eval_interval;
      if (eval_episodes > 0) config.eval_episodes = eval_episodes;
      if (variants.empty()) variants = {curriculum::variant_name(config.variant)};
      int status = 0;
      for (const auto& v : variants) {
        config.variant = curriculum::parse_variant(v);
        config.validate();
        const auto report = harness::run_experiment(config);
        std::vector<double> gens;
        for (const auto& s : report.seeds) {
          if (s.error) {
            std::cerr << v << " seed " << s.seed << " failed: " << *s.error << '\n';
            status = 2;
          } else {
            gens.push_back(s.generations_to_threshold);
          }
        }
        std::cout << v << ": " << gens.size() << "/" << report.seeds.size() << " seeds ok";
        if (!gens.empty()) std::cout << ", median generations to threshold " << harness::summarize(gens).median;
        std::cout << " -> " << (config.output / v / "report.json").string() << '\n';
      }
      return status;
    } else if (*eval) {
      const auto learner = learn::QLearner::load(policy_path);
      const double rate =
          curriculum::evaluate_policy(learner, grid::doorkey_descriptor(descriptor), episodes, size, size, seed);
      std::cout << json{{"success", rate}, {"episodes", episodes}, {"size", size}, {"descriptor", descriptor}}.dump()
                << '\n';
    } else if (*plot) {
      const fs::path target = out.empty() ? fs::path(run_dir) / "plot_data.csv" : fs::path(out);
      const auto rows = harness::emit_plot_data(run_dir, target);
      std::cout << rows << " rows -> " << target.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
