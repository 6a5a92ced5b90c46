#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "heurevo/metrics.hpp"

namespace heurevo {

inline constexpr std::size_t kShortReflectionWords = 200;
inline constexpr std::size_t kLongReflectionWords = 20;

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Prompt texts, one data file per field (see core/prompts/).
struct PromptBundle {
  std::string system_generator;
  std::string system_reflector;
  std::string task_description;
  std::string function_signature;
  std::string function_description;
  std::string seed_function;
  std::string external_knowledge;
  std::string problem_description;
  std::string user_init;
  std::string user_crossover;
  std::string user_reflect_short;
  std::string user_reflect_long;
  std::string user_mutation;

  /// Copies compiled into the library from core/prompts/.
  static PromptBundle builtin();
  /// Reads `<dir>/<name>.txt` for every field; missing files keep the builtin text.
  static PromptBundle load(const std::filesystem::path& dir);

  /// Field lookup by file stem ("user_crossover", ...). Throws RenderError if unknown.
  const std::string& get(std::string_view name) const;
  static const std::vector<std::string>& names();
};

/// Every `{token}` in a template, in order of appearance (duplicates kept).
std::vector<std::string> placeholders(std::string_view tmpl);

/// Substitutes every `{token}`; substituted text is not rescanned.
/// Throws RenderError naming the first placeholder without a binding.
std::string render(std::string_view tmpl, const Bindings& bindings);
std::string render(const PromptBundle& bundle, std::string_view template_name,
                   const Bindings& bindings);

std::string format_stats_block(const BestIndexHistogram& histogram);
/// Inverse of format_stats_block; throws ParseError on malformed input.
BestIndexHistogram parse_stats_block(std::string_view text);

/// Contents of the first ``` fenced block, fence lines stripped.
/// Throws ExtractionError when the reply holds no complete block.
std::string extract_code_block(std::string_view reply);

/// Keeps at most `max_words` whitespace-separated words.
std::string truncate_words(std::string_view text, std::size_t max_words);

class ReflectionMemory {
 public:
  void set_short_term(std::string_view text);
  void append_long_term(std::string_view text);

  const std::string& short_term() const noexcept { return short_term_; }
  const std::vector<std::string>& long_term_items() const noexcept { return long_term_; }
  /// Items joined by newlines.
  std::string long_term() const;

 private:
  std::string short_term_;
  std::vector<std::string> long_term_;
};

/// Builds the concrete generator / reflector prompts from a bundle.
class PromptComposer {
 public:
  explicit PromptComposer(PromptBundle bundle, std::string function_name = "predict_trajectory");

  const PromptBundle& bundle() const noexcept { return bundle_; }
  const std::string& function_name() const noexcept { return function_name_; }

  std::string task_description() const;
  std::string function_signature(std::string_view version) const;

  std::string init_prompt(std::string_view initial_long_term_reflection) const;
  std::string crossover_prompt(std::string_view worse_code, std::string_view better_code,
                               std::string_view short_term_reflection) const;
  std::string short_reflection_prompt(std::string_view worse_code, std::string_view worse_stats,
                                      std::string_view better_code,
                                      std::string_view better_stats) const;
  std::string long_reflection_prompt(std::string_view worse_code,
                                     std::string_view better_code) const;
  std::string mutation_prompt(std::string_view long_term_reflection,
                              std::string_view elitist_code, std::string_view elitist_stats) const;

 private:
  Bindings common() const;

  PromptBundle bundle_;
  std::string function_name_;
};

}  // namespace heurevo
