#include <gtest/gtest.h>

#include <chrono>
#include <csignal>
#include <random>

#include "heurevo/error.hpp"
#include "heurevo/prompts.hpp"
#include "heurevo/runner.hpp"
#include "../test_util.hpp"

namespace heurevo {
namespace {

using testing::line;
using testing::random_walk;

RunRequest request(const std::string& code, std::size_t agents = 2) {
  std::mt19937_64 rng(1);
  RunRequest r;
  r.id = "c1/s0";
  r.code = code;
  r.trajectories = random_walk(agents, 8, rng);
  r.k = 20;
  r.pred_len = 12;
  return r;
}

TEST(Wire, RequestRoundTrip) {
  const auto r = request("def f(): pass");
  const auto back = decode_request(encode_request(r));
  EXPECT_EQ(back.id, r.id);
  EXPECT_EQ(back.code, r.code);
  EXPECT_EQ(back.function_name, "predict_trajectory");
  EXPECT_EQ(back.k, 20u);
  EXPECT_EQ(back.pred_len, 12u);
  EXPECT_EQ(back.trajectories, r.trajectories);
}

TEST(Wire, ResponseRoundTrip) {
  const auto r = request("x");
  RunResponse res;
  res.id = r.id;
  res.status = RunStatus::kOk;
  res.predictions = cvm(r.trajectories, 20, 12);
  const auto back = decode_response(encode_response(res), r);
  ASSERT_EQ(back.status, RunStatus::kOk);
  EXPECT_EQ(*back.predictions, *res.predictions);
}

TEST(Wire, ShapeViolationsNameExpectedShape) {
  const auto r = request("x");
  const auto res = decode_response(R"({"id": "c1/s0", "status": "ok", "predictions": [[[[0, 0]]]]})", r);
  EXPECT_EQ(res.status, RunStatus::kInvalidOutput);
  EXPECT_NE(res.message.find("[20, 2, 12, 2]"), std::string::npos);
  EXPECT_NE(res.message.find("[1, 1, 1, 2]"), std::string::npos);
}

TEST(Wire, ErrorsAndGarbage) {
  const auto r = request("x");
  const auto err = decode_response(
      R"({"id": "c1/s0", "status": "error", "message": "boom", "traceback": "tb"})", r);
  EXPECT_EQ(err.status, RunStatus::kError);
  EXPECT_EQ(err.message, "boom");
  EXPECT_EQ(err.traceback, "tb");
  EXPECT_EQ(decode_response("not json", r).status, RunStatus::kInvalidOutput);
  EXPECT_EQ(decode_response("[1, 2]", r).status, RunStatus::kInvalidOutput);
  EXPECT_EQ(decode_response(R"({"id": "other", "status": "ok"})", r).status, RunStatus::kInvalidOutput);
}

TEST(Native, SeedFunctionMapsToCvm) {
  NativeRunner runner;
  auto r = request(PromptBundle::builtin().seed_function);
  const auto res = runner.run(r);
  ASSERT_EQ(res.status, RunStatus::kOk) << res.message;
  EXPECT_EQ(*res.predictions, cvm(r.trajectories, 20, 12));
}

TEST(Native, DirectiveWithParams) {
  const auto d = parse_native_directive("import numpy\n# native: cvm_s angle_sigma=0.2\n");
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->predictor, "cvm_s");
  EXPECT_DOUBLE_EQ(d->params.at("angle_sigma"), 0.2);
  EXPECT_FALSE(parse_native_directive("def f(): pass").has_value());
  EXPECT_THROW(parse_native_directive("# native: cvm_s angle_sigma"), ValidationError);
}

TEST(Native, SeedDependsOnRequestIdOnly) {
  NativeRunner a(7), b(7);
  auto r = request("# native: cvm_s");
  EXPECT_EQ(*a.run(r).predictions, *b.run(r).predictions);
  auto r2 = r;
  r2.id = "c1/s1";
  EXPECT_NE(*a.run(r).predictions, *a.run(r2).predictions);
}

TEST(Native, UnknownCodeAndFailures) {
  NativeRunner runner;
  EXPECT_EQ(runner.run(request("def predict_trajectory(x): return x")).status, RunStatus::kError);
  EXPECT_EQ(runner.run(request("# native: nonexistent")).status, RunStatus::kError);
  auto r = request("# native: trajevo_zara1");
  r.k = 5;
  EXPECT_EQ(runner.run(r).status, RunStatus::kError);
  runner.register_source("  custom source  ", "linreg");
  EXPECT_EQ(runner.run(request("custom source")).status, RunStatus::kOk);
}

TEST(SplitCommand, Whitespace) {
  EXPECT_EQ(split_command("  python3 -m  runner "), (std::vector<std::string>{"python3", "-m", "runner"}));
}

class Subprocess : public ::testing::Test {
 protected:
  SubprocessRunner make(double timeout = 5.0) { return SubprocessRunner({HEUREVO_FAKE_RUNNER}, timeout); }
};

TEST_F(Subprocess, OkReplyDecoded) {
  auto runner = make();
  auto r = request("# fake: cvm");
  const auto res = runner.run(r);
  ASSERT_EQ(res.status, RunStatus::kOk) << res.message;
  EXPECT_EQ(*res.predictions, cvm(r.trajectories, 20, 12));
  // The same worker serves the next request.
  EXPECT_EQ(runner.run(r).status, RunStatus::kOk);
  EXPECT_EQ(runner.spawn_count(), 1);
}

TEST_F(Subprocess, CandidateExceptionIsError) {
  auto runner = make();
  const auto res = runner.run(request("# fake: raise"));
  EXPECT_EQ(res.status, RunStatus::kError);
  EXPECT_NE(res.message.find("ZeroDivisionError"), std::string::npos);
  EXPECT_FALSE(res.traceback.empty());
}

TEST_F(Subprocess, BadOutputsAreInvalid) {
  auto runner = make();
  const auto shape = runner.run(request("# fake: wrong_shape"));
  EXPECT_EQ(shape.status, RunStatus::kInvalidOutput);
  EXPECT_NE(shape.message.find("[20, 2, 12, 2]"), std::string::npos);
  EXPECT_EQ(runner.run(request("# fake: nan")).status, RunStatus::kInvalidOutput);
  EXPECT_EQ(runner.run(request("# fake: garbage")).status, RunStatus::kInvalidOutput);
  EXPECT_EQ(runner.run(request("# fake: wrong_id")).status, RunStatus::kInvalidOutput);
  EXPECT_EQ(runner.spawn_count(), 1);
}

TEST_F(Subprocess, HangIsKilledWithinBudgetAndRespawned) {
  auto runner = make(1.0);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = runner.run(request("# fake: hang"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(res.status, RunStatus::kTimeout);
  EXPECT_LT(secs, 2.0);
  EXPECT_GE(secs, 0.9);
  const auto next = runner.run(request("# fake: cvm"));
  EXPECT_EQ(next.status, RunStatus::kOk);
  EXPECT_EQ(runner.spawn_count(), 2);
}

TEST_F(Subprocess, DeadWorkerIsTimeoutThenRespawned) {
  auto runner = make();
  EXPECT_EQ(runner.run(request("# fake: die")).status, RunStatus::kTimeout);
  EXPECT_EQ(runner.run(request("# fake: cvm")).status, RunStatus::kOk);
  EXPECT_EQ(runner.spawn_count(), 2);
}

TEST_F(Subprocess, MissingExecutableFailsCleanly) {
  SubprocessRunner runner({"/nonexistent/heurevo-worker"}, 2.0);
  EXPECT_EQ(runner.run(request("x")).status, RunStatus::kTimeout);
  EXPECT_THROW(SubprocessRunner({}, 1.0), ValidationError);
}

}  // namespace
}  // namespace heurevo
