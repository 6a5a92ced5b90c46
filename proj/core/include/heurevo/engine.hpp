#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "heurevo/llm.hpp"
#include "heurevo/metrics.hpp"
#include "heurevo/prompts.hpp"
#include "heurevo/random.hpp"
#include "heurevo/runner.hpp"

namespace heurevo {

using CandidateId = std::uint64_t;

enum class CandidateStatus { kPending, kOk, kExecError, kTimeout, kInvalidOutput };
enum class Birth { kSeed, kInit, kCrossover, kMutation };

std::string to_string(CandidateStatus status);
std::string to_string(Birth birth);

struct AggregateMetrics {
  double min_ade = 0.0;
  double min_fde = 0.0;
  double objective_j = 0.0;
  std::size_t scenes = 0;
};

struct Candidate {
  CandidateId id = 0;
  std::string code;
  CandidateStatus status = CandidateStatus::kPending;
  std::optional<AggregateMetrics> metrics;
  std::optional<double> objective_j;
  std::optional<BestIndexHistogram> histogram;
  std::vector<CandidateId> parents;
  Birth birth = Birth::kInit;
  int generation = 0;
  std::string error;

  bool ok() const noexcept { return status == CandidateStatus::kOk; }
};

/// Defaults follow the framework's published hyperparameters.
struct RunConfig {
  std::size_t population_size = 10;
  std::size_t init_count = 8;
  double elite_ratio = 0.3;
  double crossover_rate = 1.0;
  double mutation_rate = 0.5;
  double cges_temperature = 1.0;
  std::size_t k_samples = 20;
  std::size_t t_obs = 8;
  std::size_t t_pred = 12;
  double w_ade = 0.6;
  double w_fde = 0.4;
  int max_generations = 10;
  double eval_timeout_seconds = 30.0;
  std::uint64_t rng_seed = 0;
  SelectionRule selection_rule = SelectionRule::kAde;
  std::size_t eval_workers = 1;
  std::string function_name{kDefaultFunctionName};

  /// Throws ValidationError on out-of-range values.
  void validate() const;
  ObjectiveWeights weights() const { return {w_ade, w_fde}; }
};

struct ArchiveEntry {
  CandidateId candidate_id = 0;
  double objective_j = 0.0;
  int generation = 0;
};

/// Append-only record of every successful candidate across the run.
class EliteArchive {
 public:
  /// Only finite objectives are accepted; throws ContractError otherwise.
  void add(CandidateId id, double objective_j, int generation);

  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  std::span<const ArchiveEntry> entries() const noexcept { return entries_; }
  /// Lowest objective; ties resolve to the earliest entry. Empty -> nullopt.
  std::optional<ArchiveEntry> best() const;

 private:
  std::vector<ArchiveEntry> entries_;
};

/// Softmax of -J / temperature with max-subtraction.
std::vector<double> cges_probabilities(const EliteArchive& archive, double temperature);
/// Throws SamplingError on an empty archive or non-positive temperature.
CandidateId cges_sample(const EliteArchive& archive, double temperature, Rng& rng);

struct ParentDraw {
  std::size_t index = 0;  ///< into the ok pool
  bool from_elite = false;
};

/// Lowest-J ceil(elite_ratio * n) members; ties by lower id.
std::vector<std::size_t> elite_indices(std::span<const Candidate* const> pool, double elite_ratio);
inline constexpr double kElitePoolProbability = 0.3;

/// One parent draw: uniform over the elite set with probability
/// `elite_pool_probability`, otherwise uniform over the whole pool.
ParentDraw draw_parent(std::span<const Candidate* const> pool, const std::vector<std::size_t>& elite,
                       Rng& rng, double elite_pool_probability = kElitePoolProbability);

struct ParentPair {
  const Candidate* worse = nullptr;
  const Candidate* better = nullptr;
};

/// Throws SelectionError when fewer than two ok candidates are available.
ParentPair select_parents(std::span<const Candidate> population, double elite_ratio, Rng& rng);

/// Lightweight pre-evaluation screen; returns an error message or nullopt.
std::optional<std::string> screen_code(std::string_view code, std::string_view function_name);
/// Renames `def <name>_vN(` to `def <name>(`.
std::string normalize_function_name(std::string code, std::string_view function_name);

/// Runs `candidate` on every scene and fills in status, metrics, J and histogram.
Candidate evaluate_candidate(Candidate candidate, std::span<const Scene> scenes,
                             CandidateRunner& runner, const RunConfig& config);

enum class CallKind { kInit, kShortReflection, kCrossover, kLongReflection, kMutation };
std::string to_string(CallKind kind);

struct GenerationRecord {
  int generation = 0;
  std::optional<double> best_j;  ///< archive minimum after this generation
  std::optional<CandidateId> best_id;
  std::vector<CandidateId> evaluated;
};

struct RunReport {
  std::vector<GenerationRecord> generations;
  std::vector<Candidate> candidates;  ///< every candidate, by id
  std::vector<ArchiveEntry> archive;
  std::optional<CandidateId> best_id;
  std::map<std::string, int> llm_calls;  ///< per CallKind
  std::vector<std::string> long_term_reflections;
  bool stopped_early = false;
  std::string stop_reason;

  const Candidate* best() const;
  const Candidate* find(CandidateId id) const;
};

/// Reflection-guided evolutionary search over candidate programs.
class EvolutionEngine {
 public:
  EvolutionEngine(RunConfig config, PromptComposer prompts, LlmProvider& llm,
                  RunnerFactory runners, std::vector<Scene> train_scenes);

  /// Full run: initial population followed by max_generations generations.
  RunReport evolve();

  // Individual steps, exposed for tests and tooling.
  std::vector<Candidate> initialize_population();
  Candidate crossover_step(const Candidate& worse, const Candidate& better,
                           const std::string& short_reflection);
  std::string short_reflection(const Candidate& worse, const Candidate& better);
  void long_reflection(const Candidate& worse, const Candidate& better);
  /// Returns nullopt when the mutation coin flip fails (unless forced) or the
  /// archive is empty.
  std::optional<Candidate> elitist_mutation_step(Rng& rng, bool force = false);
  /// Evaluates pending candidates in place, then archives the successful ones.
  void evaluate_and_archive(std::vector<Candidate>& batch);

  const EliteArchive& archive() const noexcept { return archive_; }
  const ReflectionMemory& memory() const noexcept { return memory_; }
  const std::map<CandidateId, Candidate>& candidates() const noexcept { return all_; }
  const RunConfig& config() const noexcept { return config_; }

 private:
  Candidate make_candidate(Birth birth, std::vector<CandidateId> parents);
  Candidate from_reply(Candidate c, const std::string& reply);
  std::string ask(CallKind kind, const std::string& system, const std::string& user);
  std::string stats_text(const Candidate& c) const;
  RunReport make_report() const;

  RunConfig config_;
  PromptComposer prompts_;
  LlmProvider& llm_;
  RunnerFactory runners_;
  std::vector<Scene> scenes_;
  EliteArchive archive_;
  ReflectionMemory memory_;
  std::map<CandidateId, Candidate> all_;
  std::vector<GenerationRecord> generations_;
  std::map<std::string, int> calls_;
  CandidateId next_id_ = 0;
  int generation_ = 0;
};

}  // namespace heurevo
