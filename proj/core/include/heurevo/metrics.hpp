#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "heurevo/traj.hpp"

namespace heurevo {

inline constexpr double kDefaultWeightAde = 0.6;
inline constexpr double kDefaultWeightFde = 0.4;

/// How the joint best set k* is chosen.
enum class SelectionRule {
  kAde,       ///< argmin of the per-set mean ADE (default)
  kWeighted,  ///< argmin of w_ade * ADE_k + w_fde * FDE_k
};

struct ObjectiveWeights {
  double ade = kDefaultWeightAde;
  double fde = kDefaultWeightFde;
};

struct EvalMetrics {
  double min_ade = 0.0;
  double min_fde = 0.0;
  std::size_t best_k = 0;
  double objective_j = 0.0;
  std::vector<std::size_t> per_agent_best_index;
};

/// Index -> count, zero-filled over [0, K).
using BestIndexHistogram = std::map<std::size_t, long long>;

/// Mean Euclidean displacement over every (agent, frame) pair.
double ade(const TrajTensor& pred, const TrajTensor& gt);
/// Mean Euclidean displacement over agents at the final frame.
double fde(const TrajTensor& pred, const TrajTensor& gt);

double combined_objective(double min_ade, double min_fde, ObjectiveWeights w = {});

/// Joint best-of-K evaluation of one scene. Ties resolve to the lowest index.
EvalMetrics evaluate_min_of_k(const PredictionSet& preds, const TrajTensor& gt,
                              SelectionRule rule = SelectionRule::kAde,
                              ObjectiveWeights weights = {});

BestIndexHistogram best_index_histogram(std::span<const EvalMetrics> results, std::size_t k);

/// Running mean of per-scene metrics plus the pooled best-index histogram.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(std::size_t k, ObjectiveWeights weights = {});

  void add(const EvalMetrics& m);

  std::size_t scenes() const noexcept { return scenes_; }
  double mean_ade() const;
  double mean_fde() const;
  double objective() const;
  const BestIndexHistogram& histogram() const noexcept { return histogram_; }

 private:
  std::size_t k_;
  ObjectiveWeights weights_;
  std::size_t scenes_ = 0;
  double sum_ade_ = 0.0;
  double sum_fde_ = 0.0;
  BestIndexHistogram histogram_;
};

}  // namespace heurevo
