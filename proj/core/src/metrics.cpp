#include "heurevo/metrics.hpp"

#include <limits>
#include <string>

#include "heurevo/error.hpp"

namespace heurevo {

namespace {

void check_same_shape(const TrajTensor& pred, const TrajTensor& gt) {
  if (pred.num_agents() != gt.num_agents() || pred.num_frames() != gt.num_frames()) {
    throw ContractError("shape mismatch: pred [" + std::to_string(pred.num_agents()) + " x " +
                        std::to_string(pred.num_frames()) + "] vs gt [" +
                        std::to_string(gt.num_agents()) + " x " +
                        std::to_string(gt.num_frames()) + "]");
  }
  if (pred.unit() != gt.unit()) throw ContractError("unit mismatch between pred and gt");
  if (pred.num_agents() == 0 || pred.num_frames() == 0) {
    throw ContractError("empty trajectory tensor");
  }
}

}  // namespace

double ade(const TrajTensor& pred, const TrajTensor& gt) {
  check_same_shape(pred, gt);
  pred.check_finite("prediction");
  gt.check_finite("ground truth");
  double sum = 0.0;
  for (std::size_t a = 0; a < gt.num_agents(); ++a) {
    for (std::size_t t = 0; t < gt.num_frames(); ++t) sum += (pred.at(a, t) - gt.at(a, t)).norm();
  }
  return sum / static_cast<double>(gt.num_agents() * gt.num_frames());
}

double fde(const TrajTensor& pred, const TrajTensor& gt) {
  check_same_shape(pred, gt);
  pred.check_finite("prediction");
  gt.check_finite("ground truth");
  double sum = 0.0;
  for (std::size_t a = 0; a < gt.num_agents(); ++a) sum += (pred.last(a) - gt.last(a)).norm();
  return sum / static_cast<double>(gt.num_agents());
}

double combined_objective(double min_ade, double min_fde, ObjectiveWeights w) {
  return w.ade * min_ade + w.fde * min_fde;
}

EvalMetrics evaluate_min_of_k(const PredictionSet& preds, const TrajTensor& gt,
                              SelectionRule rule, ObjectiveWeights weights) {
  const std::size_t k_count = preds.k();
  if (k_count == 0) throw ValidationError("evaluate_min_of_k: K must be positive");
  if (preds.num_agents() != gt.num_agents() || preds.num_frames() != gt.num_frames()) {
    throw ContractError("evaluate_min_of_k: prediction dims do not match ground truth");
  }
  if (preds.unit() != gt.unit()) throw ContractError("evaluate_min_of_k: unit mismatch");
  if (!preds.all_finite()) throw ValidationError("prediction set contains non-finite values");
  gt.check_finite("ground truth");

  const std::size_t agents = gt.num_agents();
  const std::size_t frames = gt.num_frames();
  const double inv_frames = 1.0 / static_cast<double>(frames);

  EvalMetrics out;
  out.per_agent_best_index.assign(agents, 0);
  std::vector<double> best_agent_ade(agents, std::numeric_limits<double>::infinity());
  double best_score = std::numeric_limits<double>::infinity();

  for (std::size_t k = 0; k < k_count; ++k) {
    double sum_disp = 0.0;
    double sum_final = 0.0;
    for (std::size_t a = 0; a < agents; ++a) {
      double agent_sum = 0.0;
      for (std::size_t t = 0; t < frames; ++t) {
        agent_sum += (preds.at(k, a, t) - gt.at(a, t)).norm();
      }
      sum_disp += agent_sum;
      sum_final += (preds.at(k, a, frames - 1) - gt.last(a)).norm();
      const double agent_ade = agent_sum * inv_frames;
      if (agent_ade < best_agent_ade[a]) {
        best_agent_ade[a] = agent_ade;
        out.per_agent_best_index[a] = k;
      }
    }
    const double set_ade = sum_disp / static_cast<double>(agents * frames);
    const double set_fde = sum_final / static_cast<double>(agents);
    const double score =
        rule == SelectionRule::kAde ? set_ade : combined_objective(set_ade, set_fde, weights);
    if (score < best_score) {
      best_score = score;
      out.best_k = k;
      out.min_ade = set_ade;
      out.min_fde = set_fde;
    }
  }
  out.objective_j = combined_objective(out.min_ade, out.min_fde, weights);
  return out;
}

BestIndexHistogram best_index_histogram(std::span<const EvalMetrics> results, std::size_t k) {
  BestIndexHistogram hist;
  for (std::size_t i = 0; i < k; ++i) hist[i] = 0;
  for (const auto& r : results) {
    for (std::size_t idx : r.per_agent_best_index) {
      if (idx >= k) {
        throw ContractError("best index " + std::to_string(idx) + " outside [0, " +
                            std::to_string(k) + ")");
      }
      ++hist[idx];
    }
  }
  return hist;
}

MetricsAccumulator::MetricsAccumulator(std::size_t k, ObjectiveWeights weights)
    : k_(k), weights_(weights) {
  for (std::size_t i = 0; i < k_; ++i) histogram_[i] = 0;
}

void MetricsAccumulator::add(const EvalMetrics& m) {
  ++scenes_;
  sum_ade_ += m.min_ade;
  sum_fde_ += m.min_fde;
  for (std::size_t idx : m.per_agent_best_index) {
    if (idx >= k_) throw ContractError("best index outside histogram range");
    ++histogram_[idx];
  }
}

double MetricsAccumulator::mean_ade() const {
  return scenes_ == 0 ? 0.0 : sum_ade_ / static_cast<double>(scenes_);
}

double MetricsAccumulator::mean_fde() const {
  return scenes_ == 0 ? 0.0 : sum_fde_ / static_cast<double>(scenes_);
}

double MetricsAccumulator::objective() const {
  return combined_objective(mean_ade(), mean_fde(), weights_);
}

}  // namespace heurevo
