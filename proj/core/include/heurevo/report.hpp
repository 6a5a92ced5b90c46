#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "heurevo/engine.hpp"

namespace heurevo {

nlohmann::json to_json(const Candidate& c, bool include_code = false);
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const RunReport& report, const RunConfig& config);

/// Writes `<dir>/report.json`, `<dir>/metrics.jsonl` (one record per evaluated
/// candidate) and `<dir>/candidates/<id>.txt`. Contents are deterministic.
void write_run_directory(const RunReport& report, const RunConfig& config,
                         const std::filesystem::path& dir);

/// Reads one candidate record back from `<dir>/metrics.jsonl`.
std::optional<nlohmann::json> read_candidate_record(const std::filesystem::path& dir,
                                                    CandidateId id);

/// `runs/<UTC timestamp>` below `root`.
std::filesystem::path timestamped_run_dir(const std::filesystem::path& root);

}  // namespace heurevo
