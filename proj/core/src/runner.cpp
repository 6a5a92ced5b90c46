#include "heurevo/runner.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "heurevo/error.hpp"
#include "heurevo/prompts.hpp"
#include "heurevo/random.hpp"

namespace heurevo {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kOk: return "ok";
    case RunStatus::kError: return "error";
    case RunStatus::kTimeout: return "timeout";
    case RunStatus::kInvalidOutput: return "invalid_output";
  }
  return "error";
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

json tensor_to_json(const TrajTensor& t) {
  json agents = json::array();
  for (std::size_t a = 0; a < t.num_agents(); ++a) {
    json frames = json::array();
    for (std::size_t f = 0; f < t.num_frames(); ++f) {
      const Vec2 p = t.at(a, f);
      frames.push_back({p.x, p.y});
    }
    agents.push_back(std::move(frames));
  }
  return agents;
}

std::string shape_of(const json& j) {
  std::string s = "[";
  const json* cur = &j;
  bool first = true;
  while (cur->is_array()) {
    if (!first) s += ", ";
    first = false;
    s += std::to_string(cur->size());
    if (cur->empty()) break;
    cur = &cur->front();
  }
  return s + "]";
}

}  // namespace

std::string encode_request(const RunRequest& r) {
  json j = {{"id", r.id},
            {"code", r.code},
            {"function_name", r.function_name},
            {"trajectories", tensor_to_json(r.trajectories)},
            {"k", r.k},
            {"pred_len", r.pred_len}};
  return j.dump();
}

RunRequest decode_request(std::string_view line, Unit unit) {
  const json j = json::parse(line);
  RunRequest r;
  r.id = j.at("id").get<std::string>();
  r.code = j.at("code").get<std::string>();
  r.function_name = j.value("function_name", std::string(kDefaultFunctionName));
  r.k = j.at("k").get<std::size_t>();
  r.pred_len = j.at("pred_len").get<std::size_t>();
  const json& traj = j.at("trajectories");
  const std::size_t agents = traj.size();
  const std::size_t frames = agents == 0 ? 0 : traj.front().size();
  r.trajectories = TrajTensor(agents, frames, unit);
  for (std::size_t a = 0; a < agents; ++a) {
    if (traj[a].size() != frames) throw ContractError("trajectories are not rectangular");
    for (std::size_t f = 0; f < frames; ++f) {
      r.trajectories.set(a, f, {traj[a][f].at(0).get<double>(), traj[a][f].at(1).get<double>()});
    }
  }
  return r;
}

RunResponse decode_response(std::string_view line, const RunRequest& request) {
  RunResponse out;
  out.id = request.id;
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    out.status = RunStatus::kInvalidOutput;
    out.message = std::string("unparseable worker reply: ") + e.what();
    return out;
  }
  if (!j.is_object()) {
    out.status = RunStatus::kInvalidOutput;
    out.message = "worker reply is not a JSON object";
    return out;
  }
  out.id = j.value("id", request.id);
  if (out.id != request.id && out.id != "unknown") {
    out.status = RunStatus::kInvalidOutput;
    out.message = "response id '" + out.id + "' does not match request '" + request.id + "'";
    return out;
  }
  out.wall_time_ms = j.value("wall_time_ms", std::int64_t{0});
  const std::string status = j.value("status", std::string("error"));
  if (status != "ok") {
    out.status = RunStatus::kError;
    out.message = j.value("message", std::string("candidate failed"));
    out.traceback = j.value("traceback", std::string());
    return out;
  }

  const std::size_t agents = request.trajectories.num_agents();
  const json& p = j.contains("predictions") ? j["predictions"] : json();
  auto invalid = [&](const std::string& why) {
    out.status = RunStatus::kInvalidOutput;
    out.message = why;
    return out;
  };
  const std::string expected = "[" + std::to_string(request.k) + ", " + std::to_string(agents) +
                               ", " + std::to_string(request.pred_len) + ", 2]";
  if (!p.is_array() || p.size() != request.k) {
    return invalid("expected predictions of shape " + expected + ", got " + shape_of(p));
  }
  PredictionSet set(request.k, agents, request.pred_len, request.trajectories.unit());
  for (std::size_t k = 0; k < request.k; ++k) {
    if (!p[k].is_array() || p[k].size() != agents) {
      return invalid("expected predictions of shape " + expected + ", got " + shape_of(p));
    }
    for (std::size_t a = 0; a < agents; ++a) {
      const json& fr = p[k][a];
      if (!fr.is_array() || fr.size() != request.pred_len) {
        return invalid("expected predictions of shape " + expected + ", got " + shape_of(p));
      }
      for (std::size_t t = 0; t < request.pred_len; ++t) {
        const json& xy = fr[t];
        if (!xy.is_array() || xy.size() != 2 || !xy[0].is_number() || !xy[1].is_number()) {
          return invalid("expected predictions of shape " + expected + ", got " + shape_of(p));
        }
        const double x = xy[0].get<double>();
        const double y = xy[1].get<double>();
        if (!std::isfinite(x) || !std::isfinite(y)) return invalid("non-finite prediction value");
        set.set(k, a, t, {x, y});
      }
    }
  }
  out.status = RunStatus::kOk;
  out.predictions = std::move(set);
  return out;
}

std::string encode_response(const RunResponse& r) {
  json j = {{"id", r.id}, {"status", r.status == RunStatus::kOk ? "ok" : "error"},
            {"wall_time_ms", r.wall_time_ms}};
  if (r.status == RunStatus::kOk && r.predictions) {
    const PredictionSet& p = *r.predictions;
    json sets = json::array();
    for (std::size_t k = 0; k < p.k(); ++k) sets.push_back(tensor_to_json(p.sample(k)));
    j["predictions"] = std::move(sets);
  } else {
    j["message"] = r.message;
    j["traceback"] = r.traceback;
  }
  return j.dump();
}

// --- native ---------------------------------------------------------------

std::optional<NativeDirective> parse_native_directive(std::string_view code) {
  constexpr std::string_view kTag = "# native:";
  const std::size_t at = code.find(kTag);
  if (at == std::string_view::npos) return std::nullopt;
  std::size_t end = code.find('\n', at);
  if (end == std::string_view::npos) end = code.size();
  std::istringstream words(std::string(code.substr(at + kTag.size(), end - at - kTag.size())));
  NativeDirective d;
  if (!(words >> d.predictor)) throw ValidationError("empty '# native:' directive");
  std::string kv;
  while (words >> kv) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("bad native parameter '" + kv + "'");
    try {
      d.params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError("bad native parameter value '" + kv + "'");
    }
  }
  return d;
}

NativeRunner::NativeRunner(std::uint64_t engine_seed) : engine_seed_(engine_seed) {
  register_source(PromptBundle::builtin().seed_function, "cvm");
}

void NativeRunner::register_source(std::string code, std::string predictor, ParamMap params) {
  sources_[trim(code)] = {std::move(predictor), std::move(params)};
}

std::unique_ptr<Predictor> NativeRunner::resolve(std::string_view code) const {
  if (auto d = parse_native_directive(code)) return make_predictor(d->predictor, d->params);
  auto it = sources_.find(trim(code));
  if (it == sources_.end()) return nullptr;
  return make_predictor(it->second.predictor, it->second.params);
}

RunResponse NativeRunner::run(const RunRequest& request) {
  RunResponse out;
  out.id = request.id;
  const auto start = Clock::now();
  try {
    auto predictor = resolve(request.code);
    if (!predictor) {
      out.status = RunStatus::kError;
      out.message = "code does not map to a native predictor";
      return out;
    }
    const std::uint64_t seed = derive_seed(engine_seed_, {stable_hash(request.id)});
    PredictionSet p = predictor->predict(request.trajectories, request.k, request.pred_len, seed);
    if (p.k() != request.k || p.num_agents() != request.trajectories.num_agents() ||
        p.num_frames() != request.pred_len) {
      out.status = RunStatus::kInvalidOutput;
      out.message = "native predictor returned the wrong shape";
    } else if (!p.all_finite()) {
      out.status = RunStatus::kInvalidOutput;
      out.message = "non-finite prediction value";
    } else {
      out.status = RunStatus::kOk;
      out.predictions = std::move(p);
    }
  } catch (const std::exception& e) {
    out.status = RunStatus::kError;
    out.message = e.what();
  }
  out.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
  return out;
}

// --- subprocess -----------------------------------------------------------

std::vector<std::string> split_command(std::string_view command) {
  std::istringstream in{std::string(command)};
  std::vector<std::string> out;
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

SubprocessRunner::SubprocessRunner(std::vector<std::string> argv, double timeout_seconds)
    : argv_(std::move(argv)), timeout_seconds_(timeout_seconds) {
  if (argv_.empty()) throw ValidationError("runner command is empty");
  static std::once_flag ignore_sigpipe;
  std::call_once(ignore_sigpipe, [] { ::signal(SIGPIPE, SIG_IGN); });
}

SubprocessRunner::~SubprocessRunner() { stop(false); }

void SubprocessRunner::start() {
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw Error("pipe() failed: " + std::string(std::strerror(errno)));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw Error("pipe() failed: " + std::string(std::strerror(errno)));
  }
  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw Error("fork() failed: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::setpgid(0, 0);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
  ::fcntl(in_pipe[1], F_SETFL, ::fcntl(in_pipe[1], F_GETFL) | O_NONBLOCK);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  pending_.clear();
  ++spawns_;
}

void SubprocessRunner::stop(bool force) {
  if (pid_ < 0) return;
  if (to_child_ >= 0) ::close(to_child_);
  to_child_ = -1;
  if (!force) {
    // Clean shutdown: the worker exits on stdin EOF.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
        pid_ = -1;
        break;
      }
      ::usleep(10000);
    }
  }
  if (pid_ > 0) {
    ::kill(-pid_, SIGKILL);
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
  if (from_child_ >= 0) ::close(from_child_);
  from_child_ = -1;
  pid_ = -1;
  pending_.clear();
}

RunResponse SubprocessRunner::run(const RunRequest& request) {
  RunResponse out;
  out.id = request.id;
  const auto began = Clock::now();
  const auto deadline = began + std::chrono::duration_cast<Clock::duration>(
                                    std::chrono::duration<double>(timeout_seconds_));
  auto remaining_ms = [&] {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    return static_cast<int>(std::max<long long>(0, left.count()));
  };
  auto fail = [&](RunStatus status, std::string message) {
    stop(true);
    out.status = status;
    out.message = std::move(message);
    out.wall_time_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - began).count();
    return out;
  };

  if (pid_ < 0) start();

  const std::string line = encode_request(request) + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(to_child_, line.data() + written, line.size() - written);
    if (n > 0) {
      written += static_cast<std::size_t>(n);
      continue;
    }
    if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
      return fail(RunStatus::kTimeout, "worker closed its input (died)");
    }
    pollfd pfd{to_child_, POLLOUT, 0};
    const int ms = remaining_ms();
    if (ms == 0 || ::poll(&pfd, 1, ms) == 0) {
      return fail(RunStatus::kTimeout, "timed out sending request");
    }
  }

  std::size_t nl;
  while ((nl = pending_.find('\n')) == std::string::npos) {
    pollfd pfd{from_child_, POLLIN, 0};
    const int ms = remaining_ms();
    const int ready = ms == 0 ? 0 : ::poll(&pfd, 1, ms);
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) {
      return fail(RunStatus::kTimeout,
                  "exceeded " + std::to_string(timeout_seconds_) + " s budget; worker killed");
    }
    char buf[65536];
    const ssize_t n = ::read(from_child_, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return fail(RunStatus::kTimeout, "worker exited mid-request");
    pending_.append(buf, static_cast<std::size_t>(n));
  }
  const std::string reply = pending_.substr(0, nl);
  pending_.erase(0, nl + 1);
  out = decode_response(reply, request);
  if (out.wall_time_ms == 0) {
    out.wall_time_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - began).count();
  }
  return out;
}

}  // namespace heurevo
