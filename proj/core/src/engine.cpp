#include "heurevo/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "heurevo/error.hpp"

namespace heurevo {

namespace {

enum StreamTag : std::uint64_t { kSelectStream = 1, kCrossoverStream = 2, kMutationStream = 3 };

double unit_draw(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::size_t index_draw(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// True when a ranks strictly better than b: lower J, then lower id.
bool better_than(const Candidate& a, const Candidate& b) {
  if (*a.objective_j != *b.objective_j) return *a.objective_j < *b.objective_j;
  return a.id < b.id;
}

CandidateStatus status_from(RunStatus s) {
  switch (s) {
    case RunStatus::kOk: return CandidateStatus::kOk;
    case RunStatus::kTimeout: return CandidateStatus::kTimeout;
    case RunStatus::kInvalidOutput: return CandidateStatus::kInvalidOutput;
    case RunStatus::kError: break;
  }
  return CandidateStatus::kExecError;
}

}  // namespace

std::string to_string(CandidateStatus status) {
  switch (status) {
    case CandidateStatus::kPending: return "pending";
    case CandidateStatus::kOk: return "ok";
    case CandidateStatus::kExecError: return "exec_error";
    case CandidateStatus::kTimeout: return "timeout";
    case CandidateStatus::kInvalidOutput: return "invalid_output";
  }
  return "pending";
}

std::string to_string(Birth birth) {
  switch (birth) {
    case Birth::kSeed: return "seed";
    case Birth::kInit: return "init";
    case Birth::kCrossover: return "crossover";
    case Birth::kMutation: return "mutation";
  }
  return "init";
}

std::string to_string(CallKind kind) {
  switch (kind) {
    case CallKind::kInit: return "init";
    case CallKind::kShortReflection: return "short_reflection";
    case CallKind::kCrossover: return "crossover";
    case CallKind::kLongReflection: return "long_reflection";
    case CallKind::kMutation: return "mutation";
  }
  return "init";
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("invalid run config: " + what); };
  if (!(elite_ratio > 0.0 && elite_ratio <= 1.0)) fail("elite_ratio must be in (0, 1]");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) fail("crossover_rate must be in [0, 1]");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) fail("mutation_rate must be in [0, 1]");
  if (!(cges_temperature > 0.0)) fail("cges_temperature must be positive");
  if (k_samples == 0 || t_pred == 0 || t_obs < 2) fail("need k_samples >= 1, t_pred >= 1, t_obs >= 2");
  if (population_size == 0) fail("population_size must be positive");
  if (max_generations < 0) fail("max_generations must be non-negative");
  if (!(eval_timeout_seconds > 0.0)) fail("eval_timeout_seconds must be positive");
  if (eval_workers == 0) fail("eval_workers must be positive");
}

// --- archive / CGES -------------------------------------------------------

void EliteArchive::add(CandidateId id, double objective_j, int generation) {
  if (!std::isfinite(objective_j)) throw ContractError("archive entries need a finite objective");
  entries_.push_back({id, objective_j, generation});
}

std::optional<ArchiveEntry> EliteArchive::best() const {
  if (entries_.empty()) return std::nullopt;
  return *std::min_element(entries_.begin(), entries_.end(),
                           [](const ArchiveEntry& a, const ArchiveEntry& b) {
                             return a.objective_j < b.objective_j;
                           });
}

std::vector<double> cges_probabilities(const EliteArchive& archive, double temperature) {
  if (archive.empty()) throw SamplingError("CGES: archive is empty");
  if (!(temperature > 0.0)) throw SamplingError("CGES: temperature must be positive");
  const auto entries = archive.entries();
  double min_j = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) min_j = std::min(min_j, e.objective_j);
  std::vector<double> p(entries.size());
  double total = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    // exp(-J/T) with the largest exponent shifted to zero
    p[i] = std::exp(-(entries[i].objective_j - min_j) / temperature);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

CandidateId cges_sample(const EliteArchive& archive, double temperature, Rng& rng) {
  const auto p = cges_probabilities(archive, temperature);
  const double u = unit_draw(rng);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cumulative += p[i];
    if (u < cumulative) return archive.entries()[i].candidate_id;
  }
  return archive.entries().back().candidate_id;
}

// --- selection ------------------------------------------------------------

std::vector<std::size_t> elite_indices(std::span<const Candidate* const> pool, double elite_ratio) {
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return better_than(*pool[a], *pool[b]); });
  const auto n = static_cast<std::size_t>(
      std::ceil(elite_ratio * static_cast<double>(pool.size()) - 1e-12));
  order.resize(std::clamp<std::size_t>(n, 1, pool.size()));
  return order;
}

ParentDraw draw_parent(std::span<const Candidate* const> pool, const std::vector<std::size_t>& elite,
                       Rng& rng, double elite_pool_probability) {
  if (unit_draw(rng) < elite_pool_probability) {
    return {elite[index_draw(rng, elite.size())], true};
  }
  return {index_draw(rng, pool.size()), false};
}

ParentPair select_parents(std::span<const Candidate> population, double elite_ratio, Rng& rng) {
  std::vector<const Candidate*> pool;
  for (const auto& c : population) {
    if (c.ok()) pool.push_back(&c);
  }
  if (pool.size() < 2) {
    throw SelectionError("need at least 2 successful candidates, have " +
                         std::to_string(pool.size()));
  }
  const auto elite = elite_indices(pool, elite_ratio);
  constexpr int kMaxRedraws = 64;
  const std::size_t a = draw_parent(pool, elite, rng).index;
  std::size_t b = draw_parent(pool, elite, rng).index;
  for (int i = 0; i < kMaxRedraws && pool[b]->id == pool[a]->id; ++i) {
    b = draw_parent(pool, elite, rng).index;
  }
  if (pool[b]->id == pool[a]->id) b = (a + 1) % pool.size();
  const Candidate* x = pool[a];
  const Candidate* y = pool[b];
  return better_than(*x, *y) ? ParentPair{y, x} : ParentPair{x, y};
}

// --- code handling --------------------------------------------------------

std::string normalize_function_name(std::string code, std::string_view function_name) {
  const std::string head = "def " + std::string(function_name) + "_v";
  std::size_t pos = 0;
  while ((pos = code.find(head, pos)) != std::string::npos) {
    std::size_t digits = pos + head.size();
    std::size_t end = digits;
    while (end < code.size() && std::isdigit(static_cast<unsigned char>(code[end]))) ++end;
    if (end > digits && end < code.size() && code[end] == '(') {
      code.erase(pos + head.size() - 2, end - (pos + head.size() - 2));
    }
    pos += head.size();
  }
  return code;
}

std::optional<std::string> screen_code(std::string_view code, std::string_view function_name) {
  if (code.find_first_not_of(" \t\r\n") == std::string_view::npos) return "empty code";
  if (parse_native_directive(code)) return std::nullopt;
  const std::string def = "def " + std::string(function_name) + "(";
  if (code.find(def) == std::string_view::npos) {
    return "code does not define " + std::string(function_name) + "()";
  }
  std::vector<char> stack;
  for (std::size_t i = 0; i < code.size(); ++i) {
    const char c = code[i];
    if (c == '#') {
      while (i < code.size() && code[i] != '\n') ++i;
      continue;
    }
    if (c == '"' || c == '\'') {
      const bool triple = code.substr(i, 3) == std::string(3, c);
      const std::string close = triple ? std::string(3, c) : std::string(1, c);
      std::size_t j = i + close.size();
      for (; j < code.size(); ++j) {
        if (code[j] == '\\') {
          ++j;
          continue;
        }
        if (!triple && code[j] == '\n') return "unterminated string literal";
        if (code.substr(j, close.size()) == close) break;
      }
      if (j >= code.size()) return "unterminated string literal";
      i = j + close.size() - 1;
      continue;
    }
    if (c == '(' || c == '[' || c == '{') stack.push_back(c);
    if (c == ')' || c == ']' || c == '}') {
      const char want = c == ')' ? '(' : c == ']' ? '[' : '{';
      if (stack.empty() || stack.back() != want) return std::string("unbalanced '") + c + "'";
      stack.pop_back();
    }
  }
  if (!stack.empty()) return std::string("unclosed '") + stack.back() + "'";
  return std::nullopt;
}

// --- evaluation -----------------------------------------------------------

Candidate evaluate_candidate(Candidate candidate, std::span<const Scene> scenes,
                             CandidateRunner& runner, const RunConfig& config) {
  if (candidate.status != CandidateStatus::kPending) return candidate;
  if (scenes.empty()) throw ContractError("evaluate_candidate: no scenes");
  if (auto err = screen_code(candidate.code, config.function_name)) {
    candidate.status = CandidateStatus::kExecError;
    candidate.error = "syntax screen: " + *err;
    return candidate;
  }
  MetricsAccumulator acc(config.k_samples, config.weights());
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    RunRequest req;
    req.id = "c" + std::to_string(candidate.id) + "/s" + std::to_string(s);
    req.code = candidate.code;
    req.function_name = config.function_name;
    req.trajectories = scenes[s].history;
    req.k = config.k_samples;
    req.pred_len = config.t_pred;
    RunResponse resp = runner.run(req);
    if (resp.status == RunStatus::kOk && resp.predictions &&
        resp.predictions->num_frames() != scenes[s].future.num_frames()) {
      resp.status = RunStatus::kInvalidOutput;
      resp.message = "prediction length does not match the scene future";
    }
    if (resp.status != RunStatus::kOk) {
      candidate.status = status_from(resp.status);
      candidate.error = resp.message;
      return candidate;
    }
    try {
      acc.add(evaluate_min_of_k(*resp.predictions, scenes[s].future, config.selection_rule,
                                config.weights()));
    } catch (const Error& e) {
      candidate.status = CandidateStatus::kInvalidOutput;
      candidate.error = e.what();
      return candidate;
    }
  }
  const double j = acc.objective();
  if (!std::isfinite(j)) {
    candidate.status = CandidateStatus::kInvalidOutput;
    candidate.error = "non-finite objective";
    return candidate;
  }
  candidate.metrics = AggregateMetrics{acc.mean_ade(), acc.mean_fde(), j, acc.scenes()};
  candidate.objective_j = j;
  candidate.histogram = acc.histogram();
  candidate.status = CandidateStatus::kOk;
  return candidate;
}

// --- report ---------------------------------------------------------------

const Candidate* RunReport::find(CandidateId id) const {
  auto it = std::find_if(candidates.begin(), candidates.end(),
                         [&](const Candidate& c) { return c.id == id; });
  return it == candidates.end() ? nullptr : &*it;
}

const Candidate* RunReport::best() const { return best_id ? find(*best_id) : nullptr; }

// --- engine ---------------------------------------------------------------

EvolutionEngine::EvolutionEngine(RunConfig config, PromptComposer prompts, LlmProvider& llm,
                                 RunnerFactory runners, std::vector<Scene> train_scenes)
    : config_(std::move(config)),
      prompts_(std::move(prompts)),
      llm_(llm),
      runners_(std::move(runners)),
      scenes_(std::move(train_scenes)) {
  config_.validate();
}

std::string EvolutionEngine::ask(CallKind kind, const std::string& system, const std::string& user) {
  ++calls_[to_string(kind)];
  ChatRequest req;
  req.system = system;
  req.user = user;
  return llm_.complete(req);
}

Candidate EvolutionEngine::make_candidate(Birth birth, std::vector<CandidateId> parents) {
  Candidate c;
  c.id = next_id_++;
  c.birth = birth;
  c.parents = std::move(parents);
  c.generation = generation_;
  return c;
}

Candidate EvolutionEngine::from_reply(Candidate c, const std::string& reply) {
  try {
    c.code = normalize_function_name(extract_code_block(reply), config_.function_name);
  } catch (const ExtractionError& e) {
    c.status = CandidateStatus::kExecError;
    c.error = e.what();
    return c;
  }
  if (auto err = screen_code(c.code, config_.function_name)) {
    c.status = CandidateStatus::kExecError;
    c.error = "syntax screen: " + *err;
  }
  return c;
}

std::string EvolutionEngine::stats_text(const Candidate& c) const {
  return c.histogram ? format_stats_block(*c.histogram) : std::string();
}

void EvolutionEngine::evaluate_and_archive(std::vector<Candidate>& batch) {
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].status == CandidateStatus::kPending) pending.push_back(i);
  }
  const std::size_t workers = std::min(config_.eval_workers, pending.size());
  if (workers <= 1) {
    if (!pending.empty()) {
      auto runner = runners_();
      for (std::size_t i : pending) batch[i] = evaluate_candidate(batch[i], scenes_, *runner, config_);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          auto runner = runners_();
          for (std::size_t n; (n = next.fetch_add(1)) < pending.size();) {
            const std::size_t i = pending[n];
            batch[i] = evaluate_candidate(batch[i], scenes_, *runner, config_);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  // Single writer: archive and lineage are updated in batch order.
  for (const auto& c : batch) {
    all_[c.id] = c;
    if (c.ok()) archive_.add(c.id, *c.objective_j, c.generation);
  }
}

std::vector<Candidate> EvolutionEngine::initialize_population() {
  std::vector<Candidate> pop;
  Candidate seed = make_candidate(Birth::kSeed, {});
  seed.code = prompts_.bundle().seed_function;
  pop.push_back(std::move(seed));

  std::size_t provider_failures = 0;
  std::string last_error;
  const std::string prompt = prompts_.init_prompt(prompts_.bundle().external_knowledge);
  for (std::size_t i = 0; i < config_.init_count; ++i) {
    try {
      const std::string reply = ask(CallKind::kInit, prompts_.bundle().system_generator, prompt);
      pop.push_back(from_reply(make_candidate(Birth::kInit, {}), reply));
    } catch (const ProviderError& e) {
      ++provider_failures;
      last_error = e.what();
      Candidate c = make_candidate(Birth::kInit, {});
      c.status = CandidateStatus::kExecError;
      c.error = std::string("provider error: ") + e.what();
      pop.push_back(std::move(c));
    }
  }
  if (config_.init_count > 0 && provider_failures == config_.init_count) {
    throw ProviderError("every initial generation attempt failed: " + last_error);
  }
  evaluate_and_archive(pop);
  return pop;
}

std::string EvolutionEngine::short_reflection(const Candidate& worse, const Candidate& better) {
  const std::string prompt =
      prompts_.short_reflection_prompt(worse.code, stats_text(worse), better.code, stats_text(better));
  memory_.set_short_term(ask(CallKind::kShortReflection, prompts_.bundle().system_reflector, prompt));
  return memory_.short_term();
}

void EvolutionEngine::long_reflection(const Candidate& worse, const Candidate& better) {
  const std::string prompt = prompts_.long_reflection_prompt(worse.code, better.code);
  memory_.append_long_term(ask(CallKind::kLongReflection, prompts_.bundle().system_reflector, prompt));
}

Candidate EvolutionEngine::crossover_step(const Candidate& worse, const Candidate& better,
                                          const std::string& reflection) {
  const std::string prompt = prompts_.crossover_prompt(worse.code, better.code, reflection);
  const std::string reply = ask(CallKind::kCrossover, prompts_.bundle().system_generator, prompt);
  return from_reply(make_candidate(Birth::kCrossover, {worse.id, better.id}), reply);
}

std::optional<Candidate> EvolutionEngine::elitist_mutation_step(Rng& rng, bool force) {
  if (archive_.empty()) return std::nullopt;
  if (!force && !(unit_draw(rng) < config_.mutation_rate)) return std::nullopt;
  const CandidateId base_id = cges_sample(archive_, config_.cges_temperature, rng);
  const Candidate& base = all_.at(base_id);
  const std::string prompt = prompts_.mutation_prompt(memory_.long_term(), base.code, stats_text(base));
  const std::string reply = ask(CallKind::kMutation, prompts_.bundle().system_generator, prompt);
  return from_reply(make_candidate(Birth::kMutation, {base_id}), reply);
}

RunReport EvolutionEngine::make_report() const {
  RunReport r;
  r.generations = generations_;
  for (const auto& [id, c] : all_) r.candidates.push_back(c);
  r.archive.assign(archive_.entries().begin(), archive_.entries().end());
  if (auto best = archive_.best()) r.best_id = best->candidate_id;
  r.llm_calls = calls_;
  r.long_term_reflections = memory_.long_term_items();
  return r;
}

RunReport EvolutionEngine::evolve() {
  if (scenes_.empty()) throw ContractError("evolve: training scenes are empty");
  auto record = [&](const std::vector<Candidate>& batch) {
    GenerationRecord g;
    g.generation = generation_;
    if (auto best = archive_.best()) {
      g.best_j = best->objective_j;
      g.best_id = best->candidate_id;
    }
    for (const auto& c : batch) g.evaluated.push_back(c.id);
    generations_.push_back(std::move(g));
  };

  generation_ = 0;
  std::vector<Candidate> population = initialize_population();
  record(population);

  std::string stop_reason;
  for (int gen = 1; gen <= config_.max_generations && stop_reason.empty(); ++gen) {
    generation_ = gen;
    const auto g = static_cast<std::uint64_t>(gen);
    Rng select_rng(derive_seed(config_.rng_seed, {kSelectStream, g}));
    Rng crossover_rng(derive_seed(config_.rng_seed, {kCrossoverStream, g}));
    Rng mutation_rng(derive_seed(config_.rng_seed, {kMutationStream, g}));

    std::vector<Candidate> offspring;
    bool selection_failed = false;
    try {
      for (std::size_t i = 0; i < config_.population_size; ++i) {
        if (config_.crossover_rate < 1.0 && !(unit_draw(crossover_rng) < config_.crossover_rate)) {
          continue;
        }
        const ParentPair pair = select_parents(population, config_.elite_ratio, select_rng);
        const std::string reflection = short_reflection(*pair.worse, *pair.better);
        offspring.push_back(crossover_step(*pair.worse, *pair.better, reflection));
      }
    } catch (const SelectionError&) {
      selection_failed = true;
    } catch (const ProviderError& e) {
      stop_reason = e.what();
    }
    evaluate_and_archive(offspring);

    if (stop_reason.empty()) {
      try {
        std::vector<const Candidate*> ok;
        for (const auto& c : offspring) {
          if (c.ok()) ok.push_back(&c);
        }
        if (ok.size() >= 2) {
          auto [best, worst] = std::minmax_element(
              ok.begin(), ok.end(),
              [](const Candidate* a, const Candidate* b) { return better_than(*a, *b); });
          long_reflection(**worst, **best);
        }
        if (auto mutant = elitist_mutation_step(mutation_rng, selection_failed)) {
          std::vector<Candidate> batch{std::move(*mutant)};
          evaluate_and_archive(batch);
          offspring.push_back(std::move(batch.front()));
        }
      } catch (const ProviderError& e) {
        stop_reason = e.what();
      }
    }

    if (!offspring.empty()) population = offspring;
    record(offspring);
  }

  RunReport report = make_report();
  if (!stop_reason.empty()) {
    report.stopped_early = true;
    report.stop_reason = stop_reason;
  }
  return report;
}

}  // namespace heurevo
