#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "heurevo/dataset.hpp"
#include "heurevo/error.hpp"
#include "heurevo/llm.hpp"
#include "heurevo/predictors.hpp"
#include "heurevo/prompts.hpp"
#include "heurevo/report.hpp"

namespace heurevo::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

// --- runners / evaluation --------------------------------------------------

AutoRunner::AutoRunner(std::uint64_t seed, const RunnerOptions& options) : native_(seed) {
  if (options.mode != "native" && !options.command.empty()) {
    worker_.emplace(options.command, options.timeout_seconds);
  }
}

RunResponse AutoRunner::run(const RunRequest& request) {
  if (native_.resolve(request.code) || !worker_) return native_.run(request);
  return worker_->run(request);
}

RunnerFactory make_runner_factory(const RunnerOptions& options, std::uint64_t seed) {
  if (options.mode != "native" && options.mode != "subprocess" && options.mode != "auto") {
    throw ValidationError("unknown runner '" + options.mode + "' (expected native, subprocess or auto)");
  }
  if (options.mode == "subprocess") {
    if (options.command.empty()) throw ValidationError("--runner subprocess needs --runner-cmd");
    return [options] {
      return std::make_unique<SubprocessRunner>(options.command, options.timeout_seconds);
    };
  }
  return [options, seed] { return std::make_unique<AutoRunner>(seed, options); };
}

std::string heuristic_source(std::string_view name_or_path) {
  if (is_registered_predictor(name_or_path)) return "# native: " + std::string(name_or_path);
  const fs::path path{std::string(name_or_path)};
  std::error_code ec;
  if (fs::is_regular_file(path, ec)) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }
  std::string names;
  for (const auto& n : registered_predictors()) names += (names.empty() ? "" : ", ") + n;
  throw ValidationError("unknown heuristic '" + std::string(name_or_path) +
                        "'; registered: " + names + " (or pass a candidate code file)");
}

EvalRecord evaluate_on_scenes(std::string label, std::string dataset, const std::string& code,
                              std::span<const Scene> scenes, const RunnerOptions& runner,
                              std::uint64_t seed, const RunConfig& config) {
  if (scenes.empty()) throw ValidationError("no scenes to evaluate on for " + dataset);
  auto worker = make_runner_factory(runner, seed)();
  Candidate c;
  c.id = 0;
  c.code = normalize_function_name(code, config.function_name);
  c = evaluate_candidate(std::move(c), scenes, *worker, config);
  if (!c.ok()) {
    throw Error(label + " failed on " + dataset + " (" + to_string(c.status) + "): " + c.error);
  }
  EvalRecord r;
  r.heuristic = std::move(label);
  r.dataset = std::move(dataset);
  r.seed = seed;
  r.min_ade = c.metrics->min_ade;
  r.min_fde = c.metrics->min_fde;
  r.objective_j = *c.objective_j;
  r.scenes = c.metrics->scenes;
  r.histogram = *c.histogram;
  return r;
}

EvalRecord mean_record(std::span<const EvalRecord> records) {
  if (records.empty()) throw ContractError("mean_record: no records");
  EvalRecord m = records.front();
  m.seed.reset();
  m.min_ade = m.min_fde = m.objective_j = 0.0;
  for (auto& [k, n] : m.histogram) n = 0;
  for (const auto& r : records) {
    m.min_ade += r.min_ade;
    m.min_fde += r.min_fde;
    m.objective_j += r.objective_j;
    for (const auto& [k, n] : r.histogram) m.histogram[k] += n;
  }
  const auto n = static_cast<double>(records.size());
  m.min_ade /= n;
  m.min_fde /= n;
  m.objective_j /= n;
  m.seeds = records.size();
  return m;
}

// --- command line ------------------------------------------------------------

namespace {

struct Options {
  std::string data_root;
  std::string config_path;
  std::string seed = "0";
  bool seed_set = false;
  std::string format = "table";
  std::string runner = "auto";
  std::string runner_cmd;
  double eval_timeout = 30.0;

  std::string provider = "scripted";
  std::string script;
  std::string endpoint;
  std::string model = "gemini-2.0-flash";
  std::string api_key_env = "LLM_API_KEY";
  double llm_timeout = 120.0;
  int max_retries = 3;
  std::size_t concurrency = 4;

  RunConfig run;
  std::string selection_rule = "ade";

  std::string test_split;
  std::string run_dir;
  std::string runs_root = "runs";

  std::string heuristic;
  std::string dataset;
  std::string subset = "test";

  std::string table = "heuristics";

  std::string stats_run_dir;
  CandidateId candidate = 0;
};

template <typename T>
void take(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ValidationError("unknown config key '" + where + key + "'");
    }
  }
}

void apply_config(const fs::path& path, Options& o) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
    check_keys(j, {"data_root", "seed", "format", "runner", "runner_cmd", "eval_timeout_seconds",
                   "provider", "run", "run_dir", "runs_root"}, "");
    take(j, "data_root", o.data_root);
    if (j.contains("seed")) {
      o.seed = j["seed"].is_string() ? j["seed"].get<std::string>() : std::to_string(j["seed"].get<std::uint64_t>());
      o.seed_set = true;
    }
    take(j, "format", o.format);
    take(j, "runner", o.runner);
    take(j, "runner_cmd", o.runner_cmd);
    take(j, "eval_timeout_seconds", o.eval_timeout);
    take(j, "run_dir", o.run_dir);
    take(j, "runs_root", o.runs_root);
    if (j.contains("provider")) {
      const json& p = j["provider"];
      check_keys(p, {"kind", "script", "endpoint", "model_name", "api_key_env", "timeout_seconds",
                     "max_retries", "concurrency_limit"}, "provider.");
      take(p, "kind", o.provider);
      take(p, "script", o.script);
      take(p, "endpoint", o.endpoint);
      take(p, "model_name", o.model);
      take(p, "api_key_env", o.api_key_env);
      take(p, "timeout_seconds", o.llm_timeout);
      take(p, "max_retries", o.max_retries);
      take(p, "concurrency_limit", o.concurrency);
    }
    if (j.contains("run")) {
      const json& r = j["run"];
      check_keys(r, {"population_size", "init_count", "elite_ratio", "crossover_rate", "mutation_rate",
                     "cges_temperature", "k_samples", "w_ade", "w_fde", "max_generations",
                     "eval_workers", "selection_rule"}, "run.");
      take(r, "population_size", o.run.population_size);
      take(r, "init_count", o.run.init_count);
      take(r, "elite_ratio", o.run.elite_ratio);
      take(r, "crossover_rate", o.run.crossover_rate);
      take(r, "mutation_rate", o.run.mutation_rate);
      take(r, "cges_temperature", o.run.cges_temperature);
      take(r, "k_samples", o.run.k_samples);
      take(r, "w_ade", o.run.w_ade);
      take(r, "w_fde", o.run.w_fde);
      take(r, "max_generations", o.run.max_generations);
      take(r, "eval_workers", o.run.eval_workers);
      take(r, "selection_rule", o.selection_rule);
    }
  } catch (const json::exception& e) {
    throw ValidationError("bad config file " + path.string() + ": " + e.what());
  }
}

RunnerOptions runner_options(const Options& o) {
  RunnerOptions r;
  r.mode = o.runner;
  r.command = split_command(o.runner_cmd);
  r.timeout_seconds = o.eval_timeout;
  return r;
}

RunConfig run_config(const Options& o, std::uint64_t seed) {
  RunConfig c = o.run;
  c.rng_seed = seed;
  c.eval_timeout_seconds = o.eval_timeout;
  if (o.selection_rule == "ade") {
    c.selection_rule = SelectionRule::kAde;
  } else if (o.selection_rule == "weighted") {
    c.selection_rule = SelectionRule::kWeighted;
  } else {
    throw ValidationError("unknown selection rule '" + o.selection_rule + "' (expected ade or weighted)");
  }
  c.validate();
  return c;
}

WindowOptions windows(const RunConfig& c) { return {c.t_obs, c.t_pred, 1}; }

std::uint64_t single_seed(const Options& o, const char* command) {
  const SeedRange s = parse_seed_range(o.seed);
  if (s.is_range) throw ValidationError(std::string(command) + " takes a single --seed");
  return s.first;
}

// --- evolve ---

int cmd_evolve(const Options& o, std::ostream& out) {
  const std::uint64_t seed = single_seed(o, "evolve");
  const RunConfig config = run_config(o, seed);
  const SplitName test = parse_split_name(o.test_split);
  const auto data = load_leave_one_out(o.data_root, test, windows(config));
  std::vector<Scene> train;
  for (const auto& split : data.train) train.insert(train.end(), split.scenes.begin(), split.scenes.end());

  ProviderConfig pc;
  if (o.provider == "scripted") {
    pc.kind = ProviderKind::kScripted;
  } else if (o.provider == "http") {
    pc.kind = ProviderKind::kHttpChat;
  } else {
    throw ValidationError("unknown provider '" + o.provider + "' (expected scripted or http)");
  }
  pc.script_path = o.script;
  pc.endpoint = o.endpoint;
  pc.model_name = o.model;
  pc.api_key_env = o.api_key_env;
  pc.request_timeout_seconds = o.llm_timeout;
  pc.max_retries = o.max_retries;
  pc.concurrency_limit = o.concurrency;
  auto llm = make_provider(pc);

  const RunnerOptions ro = runner_options(o);
  EvolutionEngine engine(config, PromptComposer(PromptBundle::builtin(), config.function_name), *llm,
                         make_runner_factory(ro, seed), std::move(train));
  const RunReport report = engine.evolve();

  const fs::path dir = o.run_dir.empty() ? timestamped_run_dir(o.runs_root) : fs::path(o.run_dir);
  write_run_directory(report, config, dir);

  const Candidate* best = report.best();
  if (best == nullptr) throw Error("evolution produced no successful candidate; see " + dir.string());
  const EvalRecord test_rec = evaluate_on_scenes("candidate " + std::to_string(best->id), o.test_split,
                                                 best->code, data.test.scenes, ro, seed, config);
  const fs::path best_file = dir / "candidates" / (std::to_string(best->id) + ".txt");
  json summary = {{"run_dir", dir.string()},
                  {"best_id", best->id},
                  {"best_file", best_file.string()},
                  {"train_j", *best->objective_j},
                  {"test", {{"dataset", o.test_split},
                            {"min_ade", test_rec.min_ade},
                            {"min_fde", test_rec.min_fde},
                            {"objective_j", test_rec.objective_j},
                            {"scenes", test_rec.scenes}}},
                  {"stopped_early", report.stopped_early}};
  json best_js = json::array();
  for (const auto& g : report.generations) best_js.push_back(g.best_j ? json(*g.best_j) : json());
  summary["best_j_per_generation"] = best_js;
  std::ofstream(dir / "test_metrics.json") << summary.dump(2) << '\n';

  if (parse_format(o.format) == OutputFormat::kTable) {
    char line[256];
    out << "run directory: " << dir.string() << '\n';
    out << "best candidate: " << best->id << " (" << best_file.string() << ")\n";
    std::snprintf(line, sizeof line, "train J: %.4f\n", *best->objective_j);
    out << line;
    std::snprintf(line, sizeof line, "test %s: minADE %.4f  minFDE %.4f  J %.4f  (%zu scenes)\n",
                  o.test_split.c_str(), test_rec.min_ade, test_rec.min_fde, test_rec.objective_j,
                  test_rec.scenes);
    out << line;
    if (report.stopped_early) out << "stopped early: " << report.stop_reason << '\n';
  } else {
    out << summary.dump() << '\n';
  }
  return 0;
}

// --- eval ---

int cmd_eval(const Options& o, std::ostream& out) {
  const SeedRange seeds = parse_seed_range(o.seed);
  const RunConfig config = run_config(o, seeds.first);
  const SplitName split = parse_split_name(o.dataset);
  const std::string code = heuristic_source(o.heuristic);
  const DatasetSplit data = load_split(o.data_root, split, o.subset, windows(config));
  std::vector<EvalRecord> records;
  for (std::uint64_t s : seeds.seeds()) {
    records.push_back(
        evaluate_on_scenes(o.heuristic, o.dataset, code, data.scenes, runner_options(o), s, config));
  }
  if (records.size() > 1) records.push_back(mean_record(records));
  write_eval(out, records, parse_format(o.format));
  return 0;
}

// --- bench ---

EvalRecord bench_cell(const Options& o, const std::string& name, const DatasetSplit& data,
                      const std::vector<std::uint64_t>& seeds, const RunConfig& config) {
  const bool deterministic = make_predictor(name)->spec().deterministic;
  std::vector<EvalRecord> per_seed;
  for (std::uint64_t s : seeds) {
    per_seed.push_back(evaluate_on_scenes(name, to_string(data.name), heuristic_source(name), data.scenes,
                                          runner_options(o), s, config));
    if (deterministic) break;
  }
  return mean_record(per_seed);
}

int cmd_bench(const Options& o, std::ostream& out) {
  const SeedRange range = parse_seed_range(o.seed_set ? o.seed : "0..9");
  const auto seeds = range.seeds();
  const RunConfig config = run_config(o, seeds.front());
  BenchTable t;
  for (SplitName s : kEthUcySplits) t.columns.push_back(to_string(s));
  if (o.table == "heuristics") {
    t.name = "heuristics";
    t.unit = "m";
    t.rows = registered_predictors();
    t.columns.push_back("avg");
    for (SplitName s : kEthUcySplits) {
      if (!split_available(o.data_root, s, "test")) continue;
      const DatasetSplit data = load_split(o.data_root, s, "test", windows(config));
      for (const auto& h : t.rows) t.cells[{h, to_string(s)}] = bench_cell(o, h, data, seeds, config);
    }
    for (const auto& h : t.rows) {
      std::vector<EvalRecord> cols;
      for (SplitName s : kEthUcySplits) {
        if (auto it = t.cells.find({h, to_string(s)}); it != t.cells.end()) cols.push_back(it->second);
      }
      if (cols.size() == kEthUcySplits.size()) {
        EvalRecord avg = mean_record(cols);
        avg.dataset = "avg";
        avg.seeds = cols.front().seeds;
        t.cells[{h, "avg"}] = avg;
      }
    }
  } else if (o.table == "xdataset") {
    // Rows are evaluated on SDD; columns name the split a heuristic was evolved
    // on. Hand-designed baselines do not depend on it.
    t.name = "xdataset";
    t.unit = "px";
    t.rows = {"social_force", "cvm", "cvm_s", "trajevo_zara1"};
    if (split_available(o.data_root, SplitName::kSdd, "test")) {
      const DatasetSplit sdd = load_split(o.data_root, SplitName::kSdd, "test", windows(config));
      for (const auto& h : t.rows) {
        const EvalRecord rec = bench_cell(o, h, sdd, seeds, config);
        for (const auto& c : t.columns) {
          if (h == "trajevo_zara1" && c != "zara1") continue;
          t.cells[{h, c}] = rec;
        }
      }
    }
  } else {
    throw ValidationError("unknown table '" + o.table + "' (expected heuristics or xdataset)");
  }
  write_bench(out, t, parse_format(o.format));
  return 0;
}

// --- stats ---

int cmd_stats(const Options& o, std::ostream& out) {
  BestIndexHistogram h;
  if (!o.stats_run_dir.empty()) {
    const auto rec = read_candidate_record(o.stats_run_dir, o.candidate);
    if (!rec) throw ValidationError("candidate " + std::to_string(o.candidate) + " not found in " + o.stats_run_dir);
    if (!rec->contains("histogram")) {
      throw ValidationError("candidate " + std::to_string(o.candidate) + " has no histogram (status " +
                            rec->value("status", std::string("?")) + ")");
    }
    for (const auto& [k, n] : (*rec)["histogram"].items()) h[std::stoul(k)] = n.get<long long>();
  } else {
    if (o.heuristic.empty() || o.dataset.empty()) {
      throw ValidationError("stats needs --run-dir and --candidate, or --heuristic and --dataset");
    }
    const std::uint64_t seed = single_seed(o, "stats");
    const RunConfig config = run_config(o, seed);
    const DatasetSplit data = load_split(o.data_root, parse_split_name(o.dataset), o.subset, windows(config));
    h = evaluate_on_scenes(o.heuristic, o.dataset, heuristic_source(o.heuristic), data.scenes,
                           runner_options(o), seed, config).histogram;
  }
  out << format_stats_block(h) << '\n';
  return 0;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  if (const char* root = std::getenv("HEUREVO_DATA_ROOT")) o.data_root = root;
  if (o.data_root.empty()) o.data_root = "data";

  try {
    // Config first so explicit flags override it.
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) apply_config(args[i + 1], o);
      if (args[i].rfind("--config=", 0) == 0) apply_config(args[i].substr(9), o);
    }

    CLI::App app{"LLM-guided evolution of trajectory prediction heuristics", "heurevo"};
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--data-root", o.data_root, "dataset root (<root>/<split>/{train,test}/*.txt)");
    app.add_option("--config", o.config_path, "JSON config file; flags take precedence");
    auto* seed_opt = app.add_option("--seed", o.seed, "seed or inclusive range A..B");
    app.add_option("--format", o.format, "table | csv | records")->check(CLI::IsMember({"table", "csv", "records"}));
    app.add_option("--runner", o.runner, "native | subprocess | auto")
        ->check(CLI::IsMember({"native", "subprocess", "auto"}));
    app.add_option("--runner-cmd", o.runner_cmd, "worker command for the line protocol");
    app.add_option("--eval-timeout", o.eval_timeout, "per-request worker budget (s)");
    app.add_option("--k", o.run.k_samples, "samples per prediction (K)");
    app.add_option("--selection-rule", o.selection_rule, "ade | weighted");

    auto* evolve = app.add_subcommand("evolve", "evolve heuristics on four splits, test on the fifth");
    evolve->add_option("--test", o.test_split, "held-out split")->required();
    evolve->add_option("--generations", o.run.max_generations, "number of generations");
    evolve->add_option("--population", o.run.population_size, "offspring per generation");
    evolve->add_option("--init-count", o.run.init_count, "LLM-generated initial candidates");
    evolve->add_option("--elite-ratio", o.run.elite_ratio);
    evolve->add_option("--crossover-rate", o.run.crossover_rate);
    evolve->add_option("--mutation-rate", o.run.mutation_rate);
    evolve->add_option("--temperature", o.run.cges_temperature, "CGES softmax temperature");
    evolve->add_option("--eval-workers", o.run.eval_workers);
    evolve->add_option("--provider", o.provider, "scripted | http");
    evolve->add_option("--script", o.script, "scripted provider replay file");
    evolve->add_option("--endpoint", o.endpoint, "chat-completions base URL");
    evolve->add_option("--model", o.model);
    evolve->add_option("--api-key-env", o.api_key_env, "environment variable holding the API key");
    evolve->add_option("--run-dir", o.run_dir, "output directory (default runs/<timestamp>)");
    evolve->add_option("--runs-root", o.runs_root);

    auto* eval = app.add_subcommand("eval", "evaluate a heuristic on a split");
    eval->add_option("--heuristic", o.heuristic, "registered name or candidate code file")->required();
    eval->add_option("--dataset", o.dataset, "split name")->required();
    eval->add_option("--subset", o.subset, "subdirectory (default test)");

    auto* bench = app.add_subcommand("bench", "benchmark tables");
    bench->add_option("--table", o.table, "heuristics | xdataset");

    auto* stats = app.add_subcommand("stats", "print a best-index statistics block");
    stats->add_option("--run-dir", o.stats_run_dir);
    stats->add_option("--candidate", o.candidate);
    stats->add_option("--heuristic", o.heuristic);
    stats->add_option("--dataset", o.dataset);
    stats->add_option("--subset", o.subset);

    try {
      std::vector<std::string> reversed(args.rbegin(), args.rend());
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      return app.exit(e, out, err);
    }
    if (seed_opt->count() > 0) o.seed_set = true;

    if (*evolve) return cmd_evolve(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*bench) return cmd_bench(o, out);
    if (*stats) return cmd_stats(o, out);
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
}

}  // namespace heurevo::cli
