#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heurevo/engine.hpp"
#include "heurevo/runner.hpp"

namespace heurevo::cli {

enum class OutputFormat { kTable, kCsv, kRecords };
OutputFormat parse_format(std::string_view text);

/// "7" or an inclusive range "0..9".
struct SeedRange {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
  bool is_range = false;

  std::vector<std::uint64_t> seeds() const;
};
SeedRange parse_seed_range(std::string_view text);

struct RunnerOptions {
  std::string mode = "auto";  ///< native | subprocess | auto
  std::vector<std::string> command;
  double timeout_seconds = 30.0;
};

/// Native predictors first; code they cannot resolve goes to the external
/// worker when one is configured.
class AutoRunner final : public CandidateRunner {
 public:
  AutoRunner(std::uint64_t seed, const RunnerOptions& options);
  RunResponse run(const RunRequest& request) override;

 private:
  NativeRunner native_;
  std::optional<SubprocessRunner> worker_;
};

RunnerFactory make_runner_factory(const RunnerOptions& options, std::uint64_t seed);

/// Candidate source for a registered heuristic name or a code file path.
/// Unknown names raise ValidationError listing the registered ones.
std::string heuristic_source(std::string_view name_or_path);

struct EvalRecord {
  std::string heuristic;
  std::string dataset;
  std::optional<std::uint64_t> seed;  ///< empty for aggregated rows
  double min_ade = 0.0;
  double min_fde = 0.0;
  double objective_j = 0.0;
  std::size_t scenes = 0;
  std::size_t seeds = 1;
  BestIndexHistogram histogram;
};

/// Evaluates candidate code on scenes exactly as the engine does (candidate
/// id 0, per-scene seeds derived from `seed`). Throws Error when the
/// candidate does not produce valid predictions.
EvalRecord evaluate_on_scenes(std::string label, std::string dataset, const std::string& code,
                              std::span<const Scene> scenes, const RunnerOptions& runner,
                              std::uint64_t seed, const RunConfig& config);

/// Mean of per-seed records (ADE, FDE, J) with `seeds` set to the count.
EvalRecord mean_record(std::span<const EvalRecord> records);

void write_eval(std::ostream& out, std::span<const EvalRecord> records, OutputFormat format);

/// Rows x columns of "minADE/minFDE" cells; missing cells are unavailable.
struct BenchTable {
  std::string name;
  std::string unit;
  std::vector<std::string> rows;
  std::vector<std::string> columns;
  std::map<std::pair<std::string, std::string>, EvalRecord> cells;
};

void write_bench(std::ostream& out, const BenchTable& table, OutputFormat format);

/// Full command line entry point (args exclude the program name). Returns
/// the exit code; errors are printed as a single `error: ...` line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace heurevo::cli
