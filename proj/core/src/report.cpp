#include "heurevo/report.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "heurevo/error.hpp"

namespace heurevo {

using json = nlohmann::json;
namespace fs = std::filesystem;

json to_json(const Candidate& c, bool include_code) {
  json j = {{"id", c.id},
            {"status", to_string(c.status)},
            {"birth", to_string(c.birth)},
            {"generation", c.generation},
            {"parents", c.parents}};
  if (c.objective_j) j["objective_j"] = *c.objective_j;
  if (c.metrics) {
    j["min_ade"] = c.metrics->min_ade;
    j["min_fde"] = c.metrics->min_fde;
    j["scenes"] = c.metrics->scenes;
  }
  if (c.histogram) {
    json h = json::object();
    for (const auto& [k, n] : *c.histogram) h[std::to_string(k)] = n;
    j["histogram"] = std::move(h);
  }
  if (!c.error.empty()) j["error"] = c.error;
  if (include_code) j["code"] = c.code;
  return j;
}

json to_json(const RunConfig& c) {
  return {{"population_size", c.population_size},
          {"init_count", c.init_count},
          {"elite_ratio", c.elite_ratio},
          {"crossover_rate", c.crossover_rate},
          {"mutation_rate", c.mutation_rate},
          {"cges_temperature", c.cges_temperature},
          {"k_samples", c.k_samples},
          {"t_obs", c.t_obs},
          {"t_pred", c.t_pred},
          {"w_ade", c.w_ade},
          {"w_fde", c.w_fde},
          {"max_generations", c.max_generations},
          {"eval_timeout_seconds", c.eval_timeout_seconds},
          {"rng_seed", c.rng_seed},
          {"selection_rule", c.selection_rule == SelectionRule::kAde ? "ade" : "weighted"}};
}

json to_json(const RunReport& report, const RunConfig& config) {
  json gens = json::array();
  for (const auto& g : report.generations) {
    json summaries = json::array();
    for (CandidateId id : g.evaluated) {
      if (const Candidate* c = report.find(id)) summaries.push_back(to_json(*c));
    }
    json rec = {{"generation", g.generation}, {"candidates", std::move(summaries)}};
    rec["best_j"] = g.best_j ? json(*g.best_j) : json();
    rec["best_id"] = g.best_id ? json(*g.best_id) : json();
    gens.push_back(std::move(rec));
  }
  json archive = json::array();
  for (const auto& e : report.archive) {
    archive.push_back({{"id", e.candidate_id}, {"objective_j", e.objective_j},
                       {"generation", e.generation}});
  }
  json j = {{"config", to_json(config)},
            {"generations", std::move(gens)},
            {"archive", std::move(archive)},
            {"llm_calls", report.llm_calls},
            {"long_term_reflections", report.long_term_reflections},
            {"stopped_early", report.stopped_early},
            {"stop_reason", report.stop_reason}};
  if (const Candidate* best = report.best()) {
    j["best"] = to_json(*best);
  } else {
    j["best"] = json();
  }
  return j;
}

void write_run_directory(const RunReport& report, const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir / "candidates");
  for (const auto& c : report.candidates) {
    std::ofstream out(dir / "candidates" / (std::to_string(c.id) + ".txt"), std::ios::binary);
    out << c.code;
  }
  {
    std::ofstream out(dir / "metrics.jsonl", std::ios::binary);
    for (const auto& c : report.candidates) out << to_json(c).dump() << '\n';
  }
  std::ofstream out(dir / "report.json", std::ios::binary);
  out << to_json(report, config).dump(2) << '\n';
  if (!out) throw Error("failed to write " + (dir / "report.json").string());
}

std::optional<json> read_candidate_record(const fs::path& dir, CandidateId id) {
  std::ifstream in(dir / "metrics.jsonl");
  if (!in) throw ValidationError("no metrics.jsonl in run directory " + dir.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (j.value("id", CandidateId{0}) == id) return j;
  }
  return std::nullopt;
}

fs::path timestamped_run_dir(const fs::path& root) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return root / buf;
}

}  // namespace heurevo
