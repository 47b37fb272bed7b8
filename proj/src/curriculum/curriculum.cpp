#include "sebn/curriculum/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include "sebn/bayes/network.hpp"

namespace sebn::curriculum {

Variant parse_variant(const std::string& text) {
  if (text == "sebn") return Variant::kSebn;
  if (text == "uniform") return Variant::kUniform;
  if (text == "anti") return Variant::kAnti;
  if (text == "none") return Variant::kNone;
  throw std::invalid_argument("unknown curriculum variant '" + text + "'");
}

std::string variant_name(Variant variant) {
  switch (variant) {
    case Variant::kSebn: return "sebn";
    case Variant::kUniform: return "uniform";
    case Variant::kAnti: return "anti";
    case Variant::kNone: return "none";
  }
  return "?";
}

InitMode parse_init_mode(const std::string& text) {
  if (text == "uniform") return InitMode::kUniform;
  if (text == "easy-biased") return InitMode::kEasyBiased;
  throw std::invalid_argument("unknown init mode '" + text + "'");
}

double TaskDistribution::weight_of(const model::TaskDescriptor& task) const {
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i] == task) return weights[i];
  }
  return 0.0;
}

void TaskDistribution::validate() const {
  if (support.empty()) throw std::invalid_argument("task distribution: empty support");
  if (weights.size() != support.size()) throw std::invalid_argument("task distribution: weights do not match support");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("task distribution: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("task distribution: weights do not sum to 1");
  std::set<model::TaskDescriptor> unique(support.begin(), support.end());
  if (unique.size() != support.size()) throw std::invalid_argument("task distribution: duplicate task");
}

double TaskDistribution::expected_difficulty() const {
  double e = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) e += weights[i] * model::task_difficulty(support[i]);
  return e;
}

TaskDistribution init_distribution(const std::vector<model::TaskDescriptor>& tasks, InitMode mode) {
  if (tasks.empty()) throw std::invalid_argument("init_distribution: no tasks");
  TaskDistribution d;
  d.support = tasks;
  for (const auto& t : tasks) {
    d.weights.push_back(mode == InitMode::kUniform ? 1.0 : std::ldexp(1.0, -model::task_difficulty(t)));
  }
  const double sum = std::accumulate(d.weights.begin(), d.weights.end(), 0.0);
  for (double& w : d.weights) w /= sum;
  d.validate();
  return d;
}

double fitness(double prev_pred, double curr_pred) {
  const double d = curr_pred - prev_pred;
  return d * d;
}

double anti_fitness(double prev_pred, double curr_pred, AntiFitness form) {
  const double d = curr_pred - prev_pred;
  if (form == AntiFitness::kSquaredComplement) return (1.0 - std::abs(d)) * (1.0 - std::abs(d));
  return 1.0 - d * d;
}

TaskDistribution update_distribution(const TaskDistribution& dist, const GenerationStats& stats) {
  std::vector<model::TaskDescriptor> support = dist.support;
  std::vector<double> old = dist.weights;
  std::vector<double> fit(support.size(), -1.0);
  for (const auto& s : stats.tasks) {
    if (!(s.fitness >= 0.0) || !std::isfinite(s.fitness)) throw std::invalid_argument("update_distribution: bad fitness");
    auto it = std::find(support.begin(), support.end(), s.task);
    if (it == support.end()) {
      support.push_back(s.task);
      old.push_back(0.0);
      fit.push_back(s.fitness);
    } else {
      auto& f = fit[it - support.begin()];
      if (f >= 0.0) throw std::invalid_argument("update_distribution: task listed twice");
      f = s.fitness;
    }
  }
  if (std::any_of(fit.begin(), fit.end(), [](double f) { return f < 0.0; })) {
    throw std::invalid_argument("update_distribution: stats do not cover the support");
  }
  const double total = std::accumulate(fit.begin(), fit.end(), 0.0);
  const bool fallback = total < kFitnessFloor;
  TaskDistribution next;
  next.support = std::move(support);
  next.generation = dist.generation + 1;
  const double n = static_cast<double>(next.support.size());
  for (std::size_t i = 0; i < fit.size(); ++i) {
    next.weights.push_back(0.5 * (fallback ? 1.0 / n : fit[i] / total) + 0.5 * old[i]);
  }
  const double sum = std::accumulate(next.weights.begin(), next.weights.end(), 0.0);
  for (double& w : next.weights) w /= sum;
  return next;
}

SyntheticRunner::SyntheticRunner(const model::SebnSpec& spec, const model::Phi& truth)
    : network_(model::assemble_sebn(spec, truth)) {}

model::RolloutRecord SyntheticRunner::run(const model::TaskDescriptor& task, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {task, model::sample_outcomes(network_, task, rng), 0};
}

namespace {

std::vector<model::TaskDescriptor> initial_support(const model::SebnSpec& spec, const CurriculumConfig& config,
                                                   const Curriculum& self, std::mt19937_64& rng) {
  if (config.variant == Variant::kNone) {
    if (!config.eval_task) throw std::invalid_argument("curriculum: the none variant needs an eval task");
    return {*config.eval_task};
  }
  std::vector<model::TaskDescriptor> out;
  if (spec.env_space_size() <= config.exhaustive_threshold) {
    for (const auto& env : model::enumerate_env_space(spec)) out.push_back(self.task_for_env(env));
    return out;
  }
  std::set<std::vector<int>> seen;
  for (int attempt = 0; static_cast<int>(out.size()) < config.candidates && attempt < 100 * config.candidates;
       ++attempt) {
    std::vector<int> env;
    for (const auto& v : spec.env_vars) env.push_back(std::uniform_int_distribution<int>(0, v.domain_size - 1)(rng));
    if (seen.insert(env).second) out.push_back(self.task_for_env(env));
  }
  return out;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Curriculum::Curriculum(model::SebnSpec spec, CurriculumConfig config, std::vector<model::TaskDescriptor> support)
    : spec_(std::move(spec)), config_(std::move(config)), phi_(spec_.phi_base), rng_(config_.seed) {
  model::validate_spec(spec_);
  if (config_.generation_size < 1) throw std::invalid_argument("curriculum: generation size must be at least 1");
  if (config_.history_decay < 0.0 || config_.history_decay >= 1.0) {
    throw std::invalid_argument("curriculum: history decay must be in [0, 1)");
  }
  if (config_.variant == Variant::kNone && !support.empty() &&
      !(support.size() == 1 && config_.eval_task && support[0] == *config_.eval_task)) {
    throw std::invalid_argument("curriculum: the none variant trains on the eval task only");
  }
  if (support.empty()) support = initial_support(spec_, config_, *this, rng_);
  for (auto& t : support) {
    t = model::normalize_task(spec_, t);
    model::validate_task(spec_, t);
  }
  dist_ = init_distribution(support, config_.variant == Variant::kNone ? InitMode::kUniform : config_.init);
}

model::TaskDescriptor Curriculum::task_for_env(const std::vector<int>& env) const {
  if (config_.task_for_env) return model::normalize_task(spec_, config_.task_for_env(env));
  return {env, spec_.target_vars};
}

std::vector<model::TaskDescriptor> Curriculum::sample_tasks() {
  std::vector<model::TaskDescriptor> out;
  for (int i = 0; i < config_.generation_size; ++i) out.push_back(dist_.support[bayes::sample_index(dist_.weights, rng_)]);
  return out;
}

std::vector<model::TaskDescriptor> Curriculum::evaluation_set(const bayes::Network& prev, const bayes::Network& next,
                                                              GenerationStats& stats) {
  std::vector<model::TaskDescriptor> tasks = dist_.support;
  if (config_.variant == Variant::kUniform || config_.variant == Variant::kNone) return tasks;
  auto add = [&](const std::vector<int>& env) {
    auto t = task_for_env(env);
    if (std::find(tasks.begin(), tasks.end(), t) == tasks.end()) tasks.push_back(std::move(t));
  };
  if (spec_.env_space_size() <= config_.exhaustive_threshold) {
    for (const auto& env : model::enumerate_env_space(spec_)) add(env);
    return tasks;
  }
  search::SearchConfig sc;
  sc.expansions = config_.expansions;
  sc.n = config_.candidates;
  sc.mode = config_.variant == Variant::kAnti ? search::Mode::kMin : search::Mode::kMax;
  sc.seed = config_.seed * 7919 + static_cast<std::uint64_t>(dist_.generation);
  sc.ibound = config_.ibound;
  sc.target = spec_.index_of(spec_.terminal_target);
  stats.candidates = search::select_candidates(prev, next, sc);
  stats.used_search = true;
  for (const auto& c : stats.candidates->candidates) add(c.env);
  return tasks;
}

const GenerationStats& Curriculum::run_generation(EpisodeRunner& runner) {
  GenerationStats stats;
  stats.generation = dist_.generation;
  const std::string& terminal = spec_.terminal_target;

  std::vector<model::RolloutRecord> batch;
  for (const auto& task : sample_tasks()) {
    const std::uint64_t seed = rng_();
    model::RolloutRecord r;
    try {
      r = runner.run(task, seed);
      r.task = task;
    } catch (const std::exception&) {
      r = {task, {}, 0};
      for (const auto& t : task.enabled_targets) r.outcomes[t] = false;
      ++stats.learner_failures;
    }
    r.generation = dist_.generation;
    model::validate_record(spec_, r);
    for (const auto& [t, ok] : r.outcomes) {
      auto& c = stats.target_counts[t];
      c.first += ok;
      ++c.second;
    }
    batch.push_back(std::move(r));
  }
  learner_failures_ += stats.learner_failures;

  std::vector<model::RolloutRecord> data = batch;
  std::vector<double> weights(batch.size(), 1.0);
  if (config_.history_decay > 0.0) {
    for (const auto& r : rollouts_) {
      const double w = std::pow(config_.history_decay, dist_.generation - r.generation);
      if (w < 1e-6) continue;
      data.push_back(r);
      weights.push_back(w);
    }
  }
  estimate::EmConfig em = config_.em;
  em.initial = phi_;
  em.seed = config_.em.seed + 1000003ULL * static_cast<std::uint64_t>(dist_.generation + 1) + config_.seed;
  const auto estimate = estimate::estimate_phi(spec_, data, em, weights);
  stats.phi = estimate.phi;
  stats.log_likelihood = estimate.log_likelihood;

  std::vector<model::TaskDescriptor> sampled;
  for (const auto& r : batch) sampled.push_back(r.task);
  const auto prior = model::empirical_env_prior(spec_, sampled);
  const auto prev = model::assemble_sebn(spec_, phi_, prior);
  const auto next = model::assemble_sebn(spec_, estimate.phi, prior);

  double fitness_sum = 0.0;
  for (const auto& task : evaluation_set(prev, next, stats)) {
    TaskStats ts;
    ts.task = task;
    ts.pred_prev = model::predict_success(prev, task, terminal);
    ts.pred_curr = model::predict_success(next, task, terminal);
    ts.fitness = config_.variant == Variant::kAnti ? anti_fitness(ts.pred_prev, ts.pred_curr, config_.anti_form)
                                                   : fitness(ts.pred_prev, ts.pred_curr);
    ts.weight_before = dist_.weight_of(task);
    for (const auto& r : batch) {
      if (r.task != task) continue;
      ++ts.rollouts;
      auto it = r.outcomes.find(terminal);
      ts.successes += it != r.outcomes.end() && it->second;
    }
    fitness_sum += ts.fitness;
    stats.tasks.push_back(std::move(ts));
  }

  if (config_.variant == Variant::kSebn || config_.variant == Variant::kAnti) {
    stats.fallback_uniform = fitness_sum < kFitnessFloor;
    const int generation = dist_.generation;
    dist_ = update_distribution(dist_, stats);
    dist_.generation = generation + 1;
  } else {
    ++dist_.generation;
  }
  for (auto& ts : stats.tasks) ts.weight_after = dist_.weight_of(ts.task);

  phi_ = estimate.phi;
  rollouts_.insert(rollouts_.end(), batch.begin(), batch.end());
  history_.push_back(std::move(stats));
  return history_.back();
}

void write_history_header(std::ostream& out) {
  out << "generation,task,weight_before,weight,fitness,pred_prev,pred_curr,rollouts,successes,realized\n";
}

void write_history_rows(std::ostream& out, const model::SebnSpec& spec, const GenerationStats& stats) {
  for (const auto& t : stats.tasks) {
    out << stats.generation << ',' << model::task_label(spec, t.task) << ',' << format_real(t.weight_before) << ','
        << format_real(t.weight_after) << ',' << format_real(t.fitness) << ',' << format_real(t.pred_prev) << ','
        << format_real(t.pred_curr) << ',' << t.rollouts << ',' << t.successes << ',';
    if (t.rollouts > 0) out << format_real(static_cast<double>(t.successes) / t.rollouts);
    out << '\n';
  }
}

}  // namespace sebn::curriculum
