#include "heurevo/prompts.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "heurevo/error.hpp"

namespace heurevo {

// Generated from core/prompts/*.txt at configure time.
std::string_view embedded_prompt(std::string_view name);

namespace {

constexpr std::string_view kStatsOpen = "<stats>";
constexpr std::string_view kStatsClose = "</stats>";
constexpr std::string_view kStatsExplanation =
    "Statistics of trajectory index counts with the lowest ADE. These help us understand "
    "which heuristics contribute to the performance for at least some trajectories. ";
constexpr std::string_view kStatsPrefix = "Traj Index: Count: {";

bool is_token_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_token_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

/// Length of a `{token}` starting at text[pos], or 0 if none.
std::size_t token_length(std::string_view text, std::size_t pos) {
  if (text[pos] != '{' || pos + 2 >= text.size() || !is_token_start(text[pos + 1])) return 0;
  std::size_t j = pos + 2;
  while (j < text.size() && is_token_char(text[j])) ++j;
  return j < text.size() && text[j] == '}' ? j - pos + 1 : 0;
}

std::string* field(PromptBundle& b, std::string_view name) {
  if (name == "system_generator") return &b.system_generator;
  if (name == "system_reflector") return &b.system_reflector;
  if (name == "task_description") return &b.task_description;
  if (name == "function_signature") return &b.function_signature;
  if (name == "function_description") return &b.function_description;
  if (name == "seed_function") return &b.seed_function;
  if (name == "external_knowledge") return &b.external_knowledge;
  if (name == "problem_description") return &b.problem_description;
  if (name == "user_init") return &b.user_init;
  if (name == "user_crossover") return &b.user_crossover;
  if (name == "user_reflect_short") return &b.user_reflect_short;
  if (name == "user_reflect_long") return &b.user_reflect_long;
  if (name == "user_mutation") return &b.user_mutation;
  return nullptr;
}

bool is_fence_line(std::string_view text, std::size_t line_start) {
  std::size_t i = line_start;
  while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  return text.substr(i, 3) == "```";
}

}  // namespace

const std::vector<std::string>& PromptBundle::names() {
  static const std::vector<std::string> kNames = {
      "system_generator",   "system_reflector",     "task_description",  "function_signature",
      "function_description", "seed_function",     "external_knowledge", "problem_description",
      "user_init",          "user_crossover",       "user_reflect_short", "user_reflect_long",
      "user_mutation"};
  return kNames;
}

PromptBundle PromptBundle::builtin() {
  PromptBundle b;
  for (const auto& name : names()) *field(b, name) = std::string(embedded_prompt(name));
  return b;
}

PromptBundle PromptBundle::load(const std::filesystem::path& dir) {
  PromptBundle b = builtin();
  for (const auto& name : names()) {
    std::ifstream in(dir / (name + ".txt"), std::ios::binary);
    if (!in) continue;
    std::ostringstream buf;
    buf << in.rdbuf();
    *field(b, name) = buf.str();
  }
  return b;
}

const std::string& PromptBundle::get(std::string_view name) const {
  auto* f = field(const_cast<PromptBundle&>(*this), name);
  if (f == nullptr) throw RenderError("unknown template '" + std::string(name) + "'");
  return *f;
}

std::vector<std::string> placeholders(std::string_view tmpl) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (const std::size_t n = token_length(tmpl, i); n > 0) {
      out.emplace_back(tmpl.substr(i + 1, n - 2));
      i += n - 1;
    }
  }
  return out;
}

std::string render(std::string_view tmpl, const Bindings& bindings) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const std::size_t n = token_length(tmpl, i);
    if (n == 0) {
      out.push_back(tmpl[i++]);
      continue;
    }
    const std::string_view name = tmpl.substr(i + 1, n - 2);
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      throw RenderError("missing binding for placeholder {" + std::string(name) + "}");
    }
    out += it->second;
    i += n;
  }
  return out;
}

std::string render(const PromptBundle& bundle, std::string_view template_name,
                   const Bindings& bindings) {
  return render(bundle.get(template_name), bindings);
}

std::string format_stats_block(const BestIndexHistogram& histogram) {
  std::string out;
  out += kStatsOpen;
  out += '\n';
  out += kStatsExplanation;
  out += '\n';
  out += kStatsPrefix;
  bool first = true;
  for (const auto& [index, count] : histogram) {
    if (!first) out += ", ";
    first = false;
    out += std::to_string(index) + ": " + std::to_string(count);
  }
  out += "}\n";
  out += kStatsClose;
  return out;
}

BestIndexHistogram parse_stats_block(std::string_view text) {
  const std::size_t start = text.find(kStatsPrefix);
  if (start == std::string_view::npos) throw ParseError("<stats>", 0, "missing 'Traj Index: Count:'");
  const std::size_t open = start + kStatsPrefix.size();
  const std::size_t close = text.find('}', open);
  if (close == std::string_view::npos) throw ParseError("<stats>", 0, "unterminated count map");
  BestIndexHistogram out;
  std::string_view body = text.substr(open, close - open);
  auto skip_ws = [&](std::size_t& p) {
    while (p < body.size() && (body[p] == ' ' || body[p] == ',')) ++p;
  };
  std::size_t p = 0;
  skip_ws(p);
  while (p < body.size()) {
    std::size_t index = 0;
    long long count = 0;
    auto r1 = std::from_chars(body.data() + p, body.data() + body.size(), index);
    if (r1.ec != std::errc()) throw ParseError("<stats>", 0, "bad index");
    p = static_cast<std::size_t>(r1.ptr - body.data());
    if (body.substr(p, 2) != ": ") throw ParseError("<stats>", 0, "expected ': '");
    p += 2;
    auto r2 = std::from_chars(body.data() + p, body.data() + body.size(), count);
    if (r2.ec != std::errc()) throw ParseError("<stats>", 0, "bad count");
    p = static_cast<std::size_t>(r2.ptr - body.data());
    out[index] = count;
    skip_ws(p);
  }
  return out;
}

std::string extract_code_block(std::string_view reply) {
  const std::size_t open = reply.find("```");
  if (open == std::string_view::npos) throw ExtractionError("no code emitted");
  const std::size_t body = reply.find('\n', open);
  if (body == std::string_view::npos) throw ExtractionError("no code emitted");
  std::size_t line = body + 1;
  while (line <= reply.size()) {
    if (is_fence_line(reply, line)) {
      const std::size_t end = line > body + 1 ? line - 1 : line;  // drop the newline before the fence
      return std::string(reply.substr(body + 1, end - (body + 1)));
    }
    const std::size_t next = reply.find('\n', line);
    if (next == std::string_view::npos) break;
    line = next + 1;
  }
  throw ExtractionError("no code emitted (unterminated code block)");
}

std::string truncate_words(std::string_view text, std::size_t max_words) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  std::size_t i = 0;
  while (i < text.size() && is_space(text[i])) ++i;
  const std::size_t begin = i;
  std::size_t end = begin;
  std::size_t words = 0;
  while (i < text.size() && words < max_words) {
    while (i < text.size() && !is_space(text[i])) ++i;
    ++words;
    end = i;
    while (i < text.size() && is_space(text[i])) ++i;
  }
  return std::string(text.substr(begin, end - begin));
}

void ReflectionMemory::set_short_term(std::string_view text) {
  short_term_ = truncate_words(text, kShortReflectionWords);
}

void ReflectionMemory::append_long_term(std::string_view text) {
  std::string item = truncate_words(text, kLongReflectionWords);
  if (!item.empty()) long_term_.push_back(std::move(item));
}

std::string ReflectionMemory::long_term() const {
  std::string out;
  for (const auto& item : long_term_) {
    if (!out.empty()) out += '\n';
    out += item;
  }
  return out;
}

PromptComposer::PromptComposer(PromptBundle bundle, std::string function_name)
    : bundle_(std::move(bundle)), function_name_(std::move(function_name)) {}

Bindings PromptComposer::common() const {
  Bindings b;
  b["func_name"] = function_name_;
  b["function_name"] = function_name_;
  b["problem_desc"] = bundle_.problem_description;
  b["problem_description"] = bundle_.problem_description;
  b["func_desc"] = bundle_.function_description;
  b["function_description"] = bundle_.function_description;
  b["seed_function"] = bundle_.seed_function;
  b["function_signature0"] = function_signature("_v0");
  b["function_signature1"] = function_signature("_v1");
  b["func_signature1"] = b["function_signature1"];
  return b;
}

std::string PromptComposer::task_description() const {
  return render(bundle_.task_description, common());
}

std::string PromptComposer::function_signature(std::string_view version) const {
  return render(bundle_.function_signature, Bindings{{"version", std::string(version)}});
}

std::string PromptComposer::init_prompt(std::string_view initial_long_term_reflection) const {
  Bindings b = common();
  b["task_description"] = task_description();
  b["initial_long-term_reflection"] = std::string(initial_long_term_reflection);
  return render(bundle_.user_init, b);
}

std::string PromptComposer::crossover_prompt(std::string_view worse_code,
                                             std::string_view better_code,
                                             std::string_view short_term_reflection) const {
  Bindings b = common();
  b["task_description"] = task_description();
  b["worse_code"] = std::string(worse_code);
  b["better_code"] = std::string(better_code);
  b["short_term_reflection"] = std::string(short_term_reflection);
  return render(bundle_.user_crossover, b);
}

std::string PromptComposer::short_reflection_prompt(std::string_view worse_code,
                                                    std::string_view worse_stats,
                                                    std::string_view better_code,
                                                    std::string_view better_stats) const {
  Bindings b = common();
  b["worse_code"] = std::string(worse_code);
  b["better_code"] = std::string(better_code);
  b["stats_info_worse"] = std::string(worse_stats);
  b["stats_info_better"] = std::string(better_stats);
  return render(bundle_.user_reflect_short, b);
}

std::string PromptComposer::long_reflection_prompt(std::string_view worse_code,
                                                   std::string_view better_code) const {
  Bindings b = common();
  b["worse_code"] = std::string(worse_code);
  b["better_code"] = std::string(better_code);
  return render(bundle_.user_reflect_long, b);
}

std::string PromptComposer::mutation_prompt(std::string_view long_term_reflection,
                                            std::string_view elitist_code,
                                            std::string_view elitist_stats) const {
  Bindings b = common();
  b["user_generator"] = task_description();
  b["reflection"] = std::string(long_term_reflection);
  b["elitist_code"] = std::string(elitist_code);
  b["stats_info_elitist"] = std::string(elitist_stats);
  return render(bundle_.user_mutation, b);
}

}  // namespace heurevo
