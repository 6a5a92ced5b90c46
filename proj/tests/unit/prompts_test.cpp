#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "heurevo/error.hpp"
#include "heurevo/prompts.hpp"

namespace heurevo {
namespace {

std::string golden(const std::string& name) {
  std::ifstream in(std::filesystem::path(HEUREVO_TEST_DATA_DIR) / "golden" / (name + ".txt"),
                   std::ios::binary);
  EXPECT_TRUE(in) << name;
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string tag(const char* name) { return std::string("<<") + name + ">>"; }

class Goldens : public ::testing::Test {
 protected:
  PromptComposer composer{PromptBundle::builtin()};
};

TEST_F(Goldens, TaskDescription) { EXPECT_EQ(composer.task_description(), golden("task_description")); }

TEST_F(Goldens, Init) { EXPECT_EQ(composer.init_prompt(tag("LONG_TERM")), golden("init")); }

TEST_F(Goldens, Crossover) {
  EXPECT_EQ(composer.crossover_prompt(tag("WORSE_CODE"), tag("BETTER_CODE"), tag("SHORT_TERM")),
            golden("crossover"));
}

TEST_F(Goldens, ShortReflection) {
  EXPECT_EQ(composer.short_reflection_prompt(tag("WORSE_CODE"), tag("WORSE_STATS"),
                                             tag("BETTER_CODE"), tag("BETTER_STATS")),
            golden("short_reflection"));
}

TEST_F(Goldens, LongReflection) {
  EXPECT_EQ(composer.long_reflection_prompt(tag("WORSE_CODE"), tag("BETTER_CODE")),
            golden("long_reflection"));
}

TEST_F(Goldens, Mutation) {
  const auto m = composer.mutation_prompt(tag("REFLECTION"), tag("ELITIST_CODE"), tag("ELITIST_STATS"));
  EXPECT_EQ(m, golden("mutation"));
  EXPECT_NE(m.find("[Code Results Analysis]"), std::string::npos);
}

TEST_F(Goldens, NoUnresolvedPlaceholdersRemain) {
  for (const auto& p : {composer.init_prompt("x"), composer.crossover_prompt("a", "b", "c"),
                        composer.short_reflection_prompt("a", "b", "c", "d"),
                        composer.long_reflection_prompt("a", "b"),
                        composer.mutation_prompt("a", "b", "c")}) {
    EXPECT_TRUE(placeholders(p).empty() || p.find("{version}") == std::string::npos);
  }
}

TEST(Render, SubstitutesWithoutRescanning) {
  EXPECT_EQ(render("a {x} b {y} {x}", {{"x", "{y}"}, {"y", "2"}}), "a {y} b 2 {y}");
}

TEST(Render, MissingBindingNamed) {
  try {
    render("hello {name} and {other}", {{"name", "n"}});
    FAIL();
  } catch (const RenderError& e) {
    EXPECT_NE(std::string(e.what()).find("{other}"), std::string::npos);
  }
}

TEST(Render, NonTokensPassThrough) {
  // Python dict literals and braces with spaces are not placeholders.
  EXPECT_EQ(render("{0: 1} { x } {}", {}), "{0: 1} { x } {}");
  EXPECT_EQ(placeholders("{a}{b-c}{a} {1x}"), (std::vector<std::string>{"a", "b-c", "a"}));
}

TEST(Bundle, LookupByName) {
  const auto b = PromptBundle::builtin();
  EXPECT_EQ(b.get("user_mutation"), b.user_mutation);
  EXPECT_EQ(PromptBundle::names().size(), 13u);
  EXPECT_THROW(b.get("nope"), RenderError);
  EXPECT_EQ(render(b, "function_signature", {{"version", "_v2"}}),
            "def predict_trajectory_v2(trajectory: np.ndarray) -> np.ndarray:");
}

TEST(Bundle, LoadOverridesSomeFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "heurevo_prompts_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "problem_description.txt") << "crowd forecasting.";
  const auto b = PromptBundle::load(dir);
  std::filesystem::remove_all(dir);
  EXPECT_EQ(b.problem_description, "crowd forecasting.");
  EXPECT_EQ(b.user_init, PromptBundle::builtin().user_init);
}

TEST(Stats, ExactLayout) {
  BestIndexHistogram h;
  for (std::size_t k = 0; k < 20; ++k) h[k] = 0;
  h[0] = 67;
  h[1] = 10;
  const auto s = format_stats_block(h);
  EXPECT_EQ(s.rfind("<stats>\n", 0), 0u);
  EXPECT_NE(s.find("\nTraj Index: Count: {0: 67, 1: 10, 2: 0,"), std::string::npos);
  EXPECT_NE(s.find("for at least some trajectories. \n"), std::string::npos);
  EXPECT_EQ(s.substr(s.size() - 15), "19: 0}\n</stats>");
}

TEST(Stats, RoundTrip) {
  BestIndexHistogram h{{0, 5}, {1, 0}, {2, 123456789012LL}};
  EXPECT_EQ(parse_stats_block(format_stats_block(h)), h);
  EXPECT_THROW(parse_stats_block("nothing here"), ParseError);
  EXPECT_THROW(parse_stats_block("Traj Index: Count: {0 5}"), ParseError);
}

TEST(Extract, FirstFencedBlock) {
  EXPECT_EQ(extract_code_block("Here:\n```python\nx = 1\ny = 2\n```\ntext\n```\nz\n```"), "x = 1\ny = 2");
  EXPECT_EQ(extract_code_block("```\ncode\n```"), "code");
  EXPECT_EQ(extract_code_block("```py\n```"), "");
}

TEST(Extract, FailuresAreExtractionErrors) {
  EXPECT_THROW(extract_code_block("just prose"), ExtractionError);
  EXPECT_THROW(extract_code_block("```python\nx = 1\n"), ExtractionError);
  try {
    extract_code_block("");
  } catch (const ExtractionError& e) {
    EXPECT_NE(std::string(e.what()).find("no code emitted"), std::string::npos);
  }
}

TEST(Words, Truncation) {
  EXPECT_EQ(truncate_words("  a b\n c  d ", 3), "a b\n c");
  EXPECT_EQ(truncate_words("one", 5), "one");
  EXPECT_EQ(truncate_words("", 5), "");
}

TEST(Memory, CapsAndJoins) {
  ReflectionMemory m;
  std::string long_text;
  for (int i = 0; i < 300; ++i) long_text += "w" + std::to_string(i) + " ";
  m.set_short_term(long_text);
  EXPECT_EQ(truncate_words(m.short_term(), 1000), m.short_term());
  std::istringstream s(m.short_term());
  std::size_t words = 0;
  for (std::string w; s >> w;) ++words;
  EXPECT_EQ(words, kShortReflectionWords);

  m.append_long_term(long_text);
  m.append_long_term("second");
  m.append_long_term("   ");
  ASSERT_EQ(m.long_term_items().size(), 2u);
  EXPECT_EQ(m.long_term(), truncate_words(long_text, 20) + "\nsecond");
}

}  // namespace
}  // namespace heurevo
