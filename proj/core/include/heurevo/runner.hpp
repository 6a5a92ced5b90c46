#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

#include "heurevo/predictors.hpp"
#include "heurevo/traj.hpp"

namespace heurevo {

inline constexpr std::string_view kDefaultFunctionName = "predict_trajectory";

struct RunRequest {
  std::string id;
  std::string code;
  std::string function_name{kDefaultFunctionName};
  TrajTensor trajectories;  ///< [agents x T_obs x 2]
  std::size_t k = kDefaultSamples;
  std::size_t pred_len = 12;
};

enum class RunStatus {
  kOk,
  kError,          ///< the candidate raised or could not be compiled
  kTimeout,        ///< wall-clock budget exceeded or worker died mid-request
  kInvalidOutput,  ///< reply was not a finite [k x agents x pred_len x 2] array
};

std::string to_string(RunStatus status);

struct RunResponse {
  std::string id;
  RunStatus status = RunStatus::kError;
  std::optional<PredictionSet> predictions;
  std::string message;
  std::string traceback;
  std::int64_t wall_time_ms = 0;
};

/// One JSON object per line: {id, code, function_name, trajectories, k, pred_len}.
std::string encode_request(const RunRequest& request);
RunRequest decode_request(std::string_view line, Unit unit = Unit::kMeters);
/// Worker reply line -> response. Shape and finiteness are checked against
/// the request; violations become kInvalidOutput.
RunResponse decode_response(std::string_view line, const RunRequest& request);
std::string encode_response(const RunResponse& response);

/// Executes candidate code on one scene history.
class CandidateRunner {
 public:
  virtual ~CandidateRunner() = default;
  virtual RunResponse run(const RunRequest& request) = 0;
};

using RunnerFactory = std::function<std::unique_ptr<CandidateRunner>()>;

/// In-process runner that maps candidate code onto registered native
/// predictors, either through a `# native: <name> [key=value ...]` directive
/// line or through sources registered verbatim.
class NativeRunner final : public CandidateRunner {
 public:
  /// Registers the builtin seed function as `cvm`.
  explicit NativeRunner(std::uint64_t engine_seed = 0);

  void register_source(std::string code, std::string predictor, ParamMap params = {});

  /// Predictor for `code`, or nullptr when it cannot be resolved natively.
  std::unique_ptr<Predictor> resolve(std::string_view code) const;

  RunResponse run(const RunRequest& request) override;

 private:
  struct Registered {
    std::string predictor;
    ParamMap params;
  };
  std::uint64_t engine_seed_;
  std::map<std::string, Registered, std::less<>> sources_;
};

/// Parses a `# native:` directive. Returns nullopt when the code has none.
struct NativeDirective {
  std::string predictor;
  ParamMap params;
};
std::optional<NativeDirective> parse_native_directive(std::string_view code);

/// Client for an external worker speaking the line protocol on stdin/stdout.
/// A worker that exceeds the per-request budget, or dies, is killed and a
/// fresh one is spawned for the next request.
class SubprocessRunner final : public CandidateRunner {
 public:
  SubprocessRunner(std::vector<std::string> argv, double timeout_seconds);
  ~SubprocessRunner() override;
  SubprocessRunner(const SubprocessRunner&) = delete;
  SubprocessRunner& operator=(const SubprocessRunner&) = delete;

  RunResponse run(const RunRequest& request) override;

  /// Number of worker processes started so far.
  int spawn_count() const noexcept { return spawns_; }
  pid_t worker_pid() const noexcept { return pid_; }

 private:
  void start();
  void stop(bool force);

  std::vector<std::string> argv_;
  double timeout_seconds_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string pending_;  ///< bytes read past the last newline
  int spawns_ = 0;
};

/// Splits a shell-like command line on whitespace (no quoting rules).
std::vector<std::string> split_command(std::string_view command);

}  // namespace heurevo
