// Stand-in worker for the line protocol. Behaviour is picked per request by a
// `# fake: <mode>` line in the candidate code.
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include "heurevo/predictors.hpp"
#include "heurevo/runner.hpp"

int main() {
  using namespace heurevo;
  std::ios::sync_with_stdio(false);
  std::string line;
  while (std::getline(std::cin, line)) {
    RunRequest req;
    try {
      req = decode_request(line);
    } catch (const std::exception& e) {
      std::cout << R"({"id": "unknown", "status": "error", "message": "bad request"})" << "\n" << std::flush;
      continue;
    }
    std::string mode = "cvm";
    if (auto at = req.code.find("# fake: "); at != std::string::npos) {
      mode = req.code.substr(at + 8, req.code.find('\n', at) - at - 8);
    }
    RunResponse res;
    res.id = req.id;
    res.wall_time_ms = 1;
    if (mode == "hang") {
      std::this_thread::sleep_for(std::chrono::hours(1));
    } else if (mode == "die") {
      std::_Exit(3);
    } else if (mode == "garbage") {
      std::cout << "Traceback? not json\n" << std::flush;
      continue;
    } else if (mode == "raise") {
      res.status = RunStatus::kError;
      res.message = "ZeroDivisionError: division by zero";
      res.traceback = "File \"<candidate>\", line 3";
    } else if (mode == "nan") {
      std::cout << R"({"id": ")" << req.id << R"(", "status": "ok", "predictions": [[[[NaN, 0]]]]})" << "\n"
                << std::flush;
      continue;
    } else if (mode == "wrong_id") {
      res.id = "someone-else";
      res.status = RunStatus::kError;
    } else {
      const std::size_t k = mode == "wrong_shape" ? req.k - 1 : req.k;
      res.status = RunStatus::kOk;
      res.predictions = cvm(req.trajectories, k, req.pred_len);
    }
    std::cout << encode_response(res) << "\n" << std::flush;
  }
  return 0;
}
