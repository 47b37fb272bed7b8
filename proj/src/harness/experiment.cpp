#include "sebn/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "sebn/curriculum/grid_runner.hpp"
#include "sebn/errors.hpp"
#include "sebn/grid/megagrid.hpp"

namespace sebn::harness {

namespace fs = std::filesystem;
using nlohmann::json;

Domain parse_domain(const std::string& text) {
  if (text == "doorkey") return Domain::kDoorKey;
  if (text == "synthetic") return Domain::kSynthetic;
  throw ConfigurationError("unknown domain '" + text + "'");
}

std::string domain_name(Domain domain) { return domain == Domain::kDoorKey ? "doorkey" : "synthetic"; }

namespace {

std::string anti_name(curriculum::AntiFitness form) {
  return form == curriculum::AntiFitness::kOneMinusSquared ? "one-minus-squared" : "squared-complement";
}

curriculum::AntiFitness parse_anti(const std::string& text) {
  if (text == "one-minus-squared") return curriculum::AntiFitness::kOneMinusSquared;
  if (text == "squared-complement") return curriculum::AntiFitness::kSquaredComplement;
  throw ConfigurationError("unknown anti fitness '" + text + "'");
}

std::string init_name(curriculum::InitMode mode) {
  return mode == curriculum::InitMode::kUniform ? "uniform" : "easy-biased";
}

void check_keys(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
  if (!doc.is_object()) throw ConfigurationError(where + " must be an object");
  for (const auto& [k, v] : doc.items()) {
    if (!allowed.count(k)) throw ConfigurationError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path seed_dir(const ExperimentConfig& config, std::uint64_t seed) {
  return config.output / curriculum::variant_name(config.variant) / ("seed_" + std::to_string(seed));
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

model::TaskDescriptor eval_task(const ExperimentConfig& config, const model::SebnSpec& spec) {
  if (config.domain == Domain::kDoorKey) return grid::doorkey_descriptor(config.eval_env);
  return model::normalize_task(spec, {config.eval_env, spec.target_vars});
}

// Top-N of the evaluation set by fitness when no search ran.
json generation_candidates(const model::SebnSpec& spec, const bayes::Network& shape,
                           const curriculum::GenerationStats& stats, int n, bool min_mode) {
  json entry = {{"generation", stats.generation}};
  if (stats.candidates) {
    entry["source"] = "search";
    entry["candidates"] = search::candidates_to_json(shape, *stats.candidates);
    return entry;
  }
  std::vector<const curriculum::TaskStats*> ranked;
  for (const auto& t : stats.tasks) ranked.push_back(&t);
  std::stable_sort(ranked.begin(), ranked.end(), [&](const auto* a, const auto* b) {
    return min_mode ? a->fitness < b->fitness : a->fitness > b->fitness;
  });
  if (static_cast<int>(ranked.size()) > n) ranked.resize(n);
  entry["source"] = "exhaustive";
  entry["candidates"] = json::array();
  for (const auto* t : ranked) {
    entry["candidates"].push_back({{"task", model::task_to_json(spec, t->task)},
                                   {"fitness", t->fitness},
                                   {"p_prev", t->pred_prev},
                                   {"p_next", t->pred_curr}});
  }
  return entry;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (generations < 1) throw ConfigurationError("generations must be at least 1");
  if (generation_size < 1) throw ConfigurationError("generation_size must be at least 1");
  if (eval_episodes < 1) throw ConfigurationError("eval_episodes must be at least 1");
  if (eval_interval < 1) throw ConfigurationError("eval_interval must be at least 1");
  if (seeds.empty()) throw ConfigurationError("seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigurationError("seeds must be unique");
  }
  if (grid_size < 3 || generalization_size < 3) throw ConfigurationError("grid sizes must be at least 3");
  if (!(success_threshold > 0.0 && success_threshold <= 1.0)) {
    throw ConfigurationError("success_threshold must be in (0, 1]");
  }
  if (spec.empty()) throw ConfigurationError("spec path missing");
}

ExperimentConfig config_from_json(const json& doc, const fs::path& base) {
  check_keys(doc,
             {"spec", "domain", "variant", "generations", "generation_size", "seeds", "eval_interval", "eval_episodes",
              "eval_descriptor", "grid_size", "generalization_size", "success_threshold", "output", "jobs", "init",
              "anti_fitness", "history_decay", "em", "search", "learner", "synthetic_truth"},
             "experiment config");
  ExperimentConfig c;
  try {
    if (doc.contains("spec")) {
      c.spec = doc.at("spec").get<std::string>();
      if (c.spec.is_relative() && !base.empty()) c.spec = base / c.spec;
    }
    if (doc.contains("domain")) c.domain = parse_domain(doc.at("domain").get<std::string>());
    if (doc.contains("variant")) c.variant = curriculum::parse_variant(doc.at("variant").get<std::string>());
    read(doc, "generations", c.generations);
    read(doc, "generation_size", c.generation_size);
    read(doc, "seeds", c.seeds);
    read(doc, "eval_interval", c.eval_interval);
    read(doc, "eval_episodes", c.eval_episodes);
    read(doc, "eval_descriptor", c.eval_env);
    read(doc, "grid_size", c.grid_size);
    read(doc, "generalization_size", c.generalization_size);
    read(doc, "success_threshold", c.success_threshold);
    if (doc.contains("output")) c.output = doc.at("output").get<std::string>();
    read(doc, "jobs", c.jobs);
    if (doc.contains("init")) c.init = curriculum::parse_init_mode(doc.at("init").get<std::string>());
    if (doc.contains("anti_fitness")) c.anti_form = parse_anti(doc.at("anti_fitness").get<std::string>());
    read(doc, "history_decay", c.history_decay);
    if (doc.contains("em")) {
      const auto& em = doc.at("em");
      check_keys(em, {"tolerance", "max_iterations", "restarts", "seed"}, "em");
      read(em, "tolerance", c.em.tolerance);
      read(em, "max_iterations", c.em.max_iterations);
      read(em, "restarts", c.em.restarts);
      read(em, "seed", c.em.seed);
    }
    if (doc.contains("search")) {
      const auto& s = doc.at("search");
      check_keys(s, {"candidates", "expansions", "ibound", "exhaustive_threshold"}, "search");
      read(s, "candidates", c.candidates);
      read(s, "expansions", c.expansions);
      read(s, "ibound", c.ibound);
      read(s, "exhaustive_threshold", c.exhaustive_threshold);
    }
    if (doc.contains("learner")) {
      const auto& l = doc.at("learner");
      check_keys(l, {"alpha", "gamma", "epsilon_start", "epsilon_end", "epsilon_decay_episodes", "sensing", "range"},
                 "learner");
      read(l, "alpha", c.learner.alpha);
      read(l, "gamma", c.learner.gamma);
      read(l, "epsilon_start", c.learner.epsilon_start);
      read(l, "epsilon_end", c.learner.epsilon_end);
      read(l, "epsilon_decay_episodes", c.learner.epsilon_decay_episodes);
      if (l.contains("sensing")) c.learner.sensors.sensing = grid::parse_sensing(l.at("sensing").get<std::string>());
      read(l, "range", c.learner.sensors.range);
    }
    if (doc.contains("synthetic_truth")) c.synthetic_truth = doc.at("synthetic_truth").get<model::Phi>();
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("experiment config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigurationError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigurationError(path.string() + ": " + e.what());
  }
  return config_from_json(doc, path.parent_path());
}

json config_to_json(const ExperimentConfig& c) {
  json doc = {{"spec", c.spec.string()},
              {"domain", domain_name(c.domain)},
              {"variant", curriculum::variant_name(c.variant)},
              {"generations", c.generations},
              {"generation_size", c.generation_size},
              {"seeds", c.seeds},
              {"eval_interval", c.eval_interval},
              {"eval_episodes", c.eval_episodes},
              {"eval_descriptor", c.eval_env},
              {"grid_size", c.grid_size},
              {"generalization_size", c.generalization_size},
              {"success_threshold", c.success_threshold},
              {"output", c.output.string()},
              {"jobs", c.jobs},
              {"init", init_name(c.init)},
              {"anti_fitness", anti_name(c.anti_form)},
              {"history_decay", c.history_decay},
              {"em",
               {{"tolerance", c.em.tolerance},
                {"max_iterations", c.em.max_iterations},
                {"restarts", c.em.restarts},
                {"seed", c.em.seed}}},
              {"search",
               {{"candidates", c.candidates},
                {"expansions", c.expansions},
                {"ibound", c.ibound},
                {"exhaustive_threshold", c.exhaustive_threshold}}},
              {"learner",
               {{"alpha", c.learner.alpha},
                {"gamma", c.learner.gamma},
                {"epsilon_start", c.learner.epsilon_start},
                {"epsilon_end", c.learner.epsilon_end},
                {"epsilon_decay_episodes", c.learner.epsilon_decay_episodes},
                {"sensing", grid::sensing_name(c.learner.sensors.sensing)},
                {"range", c.learner.sensors.range}}}};
  if (c.synthetic_truth) doc["synthetic_truth"] = *c.synthetic_truth;
  return doc;
}

Summary summarize(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: no values");
  std::sort(values.begin(), values.end());
  auto quantile = [&](double p) {
    const double h = (values.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - lo) * (values[hi] - values[lo]);
  };
  return {quantile(0.5), quantile(0.25), quantile(0.75)};
}

SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed) {
  SeedResult result;
  result.seed = seed;
  const fs::path dir = seed_dir(config, seed);
  try {
    fs::create_directories(dir);
    const auto spec = model::load_spec(config.spec);

    curriculum::CurriculumConfig cc;
    cc.variant = config.variant;
    cc.generation_size = config.generation_size;
    cc.init = config.init;
    cc.seed = seed;
    cc.em = config.em;
    cc.history_decay = config.history_decay;
    cc.candidates = config.candidates;
    cc.expansions = config.expansions;
    cc.ibound = config.ibound;
    cc.exhaustive_threshold = config.exhaustive_threshold;
    cc.anti_form = config.anti_form;
    cc.eval_task = eval_task(config, spec);
    model::validate_task(spec, *cc.eval_task);
    if (config.domain == Domain::kDoorKey) cc.task_for_env = grid::doorkey_descriptor;
    curriculum::Curriculum loop(spec, cc);

    learn::QConfig qc = config.learner;
    qc.seed = seed;
    learn::QLearner learner(qc);
    std::unique_ptr<curriculum::EpisodeRunner> runner;
    std::unique_ptr<curriculum::SyntheticRunner> truth;
    if (config.domain == Domain::kDoorKey) {
      runner = std::make_unique<curriculum::GridRunner>(learner, config.grid_size, config.grid_size);
    } else {
      runner = std::make_unique<curriculum::SyntheticRunner>(spec, config.synthetic_truth.value_or(spec.phi_base));
      truth = std::make_unique<curriculum::SyntheticRunner>(spec, config.synthetic_truth.value_or(spec.phi_base));
    }
    auto evaluate = [&](int size, std::uint64_t eval_seed) {
      if (config.domain == Domain::kDoorKey) {
        return curriculum::evaluate_policy(learner, *cc.eval_task, config.eval_episodes, size, size, eval_seed);
      }
      std::mt19937_64 rng(eval_seed);
      int ok = 0;
      for (int e = 0; e < config.eval_episodes; ++e) ok += truth->run(*cc.eval_task, rng()).outcomes.at(spec.terminal_target);
      return static_cast<double>(ok) / config.eval_episodes;
    };

    std::ofstream history(dir / "history.csv");
    std::ofstream rollouts(dir / "rollouts.jsonl");
    if (!history || !rollouts) throw std::runtime_error("cannot write into " + dir.string());
    curriculum::write_history_header(history);
    json candidates = json::array();
    const auto shape = model::assemble_sebn(spec);
    for (int g = 0; g < config.generations; ++g) {
      const std::size_t before = loop.rollouts().size();
      const auto& stats = loop.run_generation(*runner);
      curriculum::write_history_rows(history, spec, stats);
      for (std::size_t i = before; i < loop.rollouts().size(); ++i) {
        rollouts << model::record_to_json(spec, loop.rollouts()[i]).dump() << '\n';
      }
      candidates.push_back(generation_candidates(spec, shape, stats, config.candidates,
                                                 config.variant == curriculum::Variant::kAnti));
      const int done = g + 1;
      if (done % config.eval_interval == 0 || done == config.generations) {
        // Paired across variants: the same instances for a given seed and checkpoint.
        const double s = evaluate(config.grid_size, 0x5eb0000ULL + seed * 1000003ULL + static_cast<std::uint64_t>(done));
        result.checkpoints.push_back({done, s});
        if (!result.reached_threshold && s >= config.success_threshold) {
          result.reached_threshold = true;
          result.generations_to_threshold = done;
        }
      }
    }
    if (!result.reached_threshold) result.generations_to_threshold = config.generations + 1;
    result.generalization = evaluate(config.generalization_size, 0x32320000ULL + seed);
    result.learner_failures = loop.learner_failures();
    write_json(dir / "candidates.json", candidates);
    if (config.domain == Domain::kDoorKey) learner.save(dir / "policy.json");
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  try {
    write_json(dir / "eval.json", seed_result_to_json(result));
  } catch (const std::exception& e) {
    if (!result.error) result.error = e.what();
  }
  return result;
}

EvalReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  EvalReport report;
  report.variant = config.variant;
  report.seeds.resize(config.seeds.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(config.seeds.size(), config.jobs > 0 ? static_cast<std::size_t>(config.jobs) : hw);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) report.seeds[i] = run_seed(config, config.seeds[i]);
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  fs::create_directories(config.output / curriculum::variant_name(config.variant));
  write_json(config.output / curriculum::variant_name(config.variant) / "report.json", report_to_json(report, config));
  return report;
}

json seed_result_to_json(const SeedResult& r) {
  json doc = {{"seed", r.seed},
              {"checkpoints", json::array()},
              {"generations_to_threshold", r.generations_to_threshold},
              {"reached_threshold", r.reached_threshold},
              {"generalization", r.generalization},
              {"learner_failures", r.learner_failures}};
  for (const auto& c : r.checkpoints) doc["checkpoints"].push_back({{"generation", c.generation}, {"success", c.success}});
  if (r.error) doc["error"] = *r.error;
  return doc;
}

SeedResult seed_result_from_json(const json& doc) {
  SeedResult r;
  r.seed = doc.at("seed").get<std::uint64_t>();
  for (const auto& c : doc.at("checkpoints")) {
    r.checkpoints.push_back({c.at("generation").get<int>(), c.at("success").get<double>()});
  }
  r.generations_to_threshold = doc.at("generations_to_threshold").get<int>();
  r.reached_threshold = doc.at("reached_threshold").get<bool>();
  r.generalization = doc.at("generalization").get<double>();
  r.learner_failures = doc.at("learner_failures").get<int>();
  if (doc.contains("error")) r.error = doc.at("error").get<std::string>();
  return r;
}

json report_to_json(const EvalReport& report, const ExperimentConfig& config) {
  json doc = {{"variant", curriculum::variant_name(report.variant)}, {"seeds", json::array()}};
  std::vector<const SeedResult*> ok;
  for (const auto& s : report.seeds) {
    doc["seeds"].push_back(seed_result_to_json(s));
    if (!s.error) ok.push_back(&s);
  }
  auto summary = [](const std::vector<double>& v) -> json {
    if (v.empty()) return nullptr;
    const Summary s = summarize(v);
    return {{"median", s.median}, {"q1", s.q1}, {"q3", s.q3}, {"n", v.size()}};
  };
  json checkpoints = json::array();
  if (!ok.empty()) {
    for (std::size_t i = 0; i < ok.front()->checkpoints.size(); ++i) {
      std::vector<double> v;
      for (const auto* s : ok) v.push_back(s->checkpoints.at(i).success);
      json c = summary(v);
      c["generation"] = ok.front()->checkpoints[i].generation;
      checkpoints.push_back(c);
    }
  }
  std::vector<double> gens, general;
  for (const auto* s : ok) {
    gens.push_back(s->generations_to_threshold);
    general.push_back(s->generalization);
  }
  doc["aggregate"] = {{"checkpoints", checkpoints},
                      {"generations_to_threshold", summary(gens)},
                      {"generalization", summary(general)},
                      {"failed_seeds", report.seeds.size() - ok.size()}};
  doc["config"] = config_to_json(config);
  return doc;
}

std::size_t emit_plot_data(const fs::path& run_dir, const fs::path& out_csv) {
  if (!fs::is_directory(run_dir)) throw std::runtime_error("run directory " + run_dir.string() + " does not exist");
  std::vector<fs::path> variants;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    if (e.is_directory()) variants.push_back(e.path());
  }
  std::sort(variants.begin(), variants.end());
  std::ostringstream rows;
  std::size_t count = 0;
  for (const auto& v : variants) {
    std::vector<std::pair<std::uint64_t, fs::path>> seeds;
    for (const auto& e : fs::directory_iterator(v)) {
      const std::string name = e.path().filename().string();
      if (!e.is_directory() || name.rfind("seed_", 0) != 0) continue;
      seeds.emplace_back(std::stoull(name.substr(5)), e.path());
    }
    std::sort(seeds.begin(), seeds.end());
    for (const auto& [seed, path] : seeds) {
      const fs::path eval = path / "eval.json";
      std::ifstream in(eval);
      if (!in) throw std::runtime_error("missing " + eval.string());
      const SeedResult r = seed_result_from_json(json::parse(in));
      for (const auto& c : r.checkpoints) {
        rows << c.generation << ',' << v.filename().string() << ',' << seed << ",eval_success," << format_real(c.success)
             << '\n';
        ++count;
      }
    }
  }
  if (count == 0) {
    throw std::runtime_error("no <variant>/seed_<s>/eval.json with checkpoints under " + run_dir.string());
  }
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write " + out_csv.string());
  out << "generation,variant,seed,metric,value\n" << rows.str();
  return count;
}

}  // namespace sebn::harness
