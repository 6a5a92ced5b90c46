#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "heurevo/random.hpp"
#include "heurevo/traj.hpp"

namespace heurevo {

inline constexpr std::size_t kDefaultSamples = 20;
inline constexpr double kCvmSAngleSigma = 0.4363323129985824;  // 25 degrees
inline constexpr double kCtrvOmegaEps = 1e-4;                  // rad / frame

using ParamMap = std::map<std::string, double>;

struct PredictorSpec {
  std::string name;
  ParamMap params;
  bool deterministic = true;
};

/// Common interface: (history [agents x T_obs x 2], K, T_pred, seed) -> [K x agents x T_pred x 2].
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual const PredictorSpec& spec() const = 0;
  virtual PredictionSet predict(const TrajTensor& history, std::size_t k, std::size_t t_pred,
                                std::uint64_t seed) const = 0;
};

/// Rotates v counter-clockwise by `angle` radians.
Vec2 rotate(Vec2 v, double angle);

PredictionSet cvm(const TrajTensor& history, std::size_t k, std::size_t t_pred);

PredictionSet cvm_s(const TrajTensor& history, std::size_t k, std::size_t t_pred,
                    double angle_sigma, std::uint64_t seed);

PredictionSet constant_acc(const TrajTensor& history, std::size_t k, std::size_t t_pred);

PredictionSet ctrv(const TrajTensor& history, std::size_t k, std::size_t t_pred,
                   double omega_eps = kCtrvOmegaEps);

PredictionSet linreg(const TrajTensor& history, std::size_t k, std::size_t t_pred);

/// Simplified social force: relaxation toward a linearly extrapolated goal
/// plus exponential pairwise repulsion. Forces are in units per second^2 and
/// integrated with a fixed frame interval `dt`.
struct SocialForceParams {
  double strength = 2.1;     ///< A
  double range = 0.3;        ///< B
  double radius = 2.0;       ///< neighbour cut-off r
  double vmax_factor = 2.0;  ///< v_max = vmax_factor * initial speed
  double tau = 0.5;          ///< relaxation time (s)
  double dt = 0.4;           ///< frame interval (s)
  double strength_jitter = 0.5;  ///< sets k >= 1 use A * U(1 - j, 1 + j)
};

PredictionSet social_force(const TrajTensor& history, std::size_t k, std::size_t t_pred,
                           const SocialForceParams& params, std::uint64_t seed);

/// Native port of the best evolved Zara1 heuristic. Requires K == 20.
PredictionSet reference_zara1(const TrajTensor& history, std::size_t k, std::size_t t_pred,
                              Sampler& sampler);
PredictionSet reference_zara1(const TrajTensor& history, std::size_t k, std::size_t t_pred,
                              std::uint64_t seed);

/// Registry of the native heuristics, addressable by their CLI names.
std::vector<std::string> registered_predictors();
bool is_registered_predictor(std::string_view name);
/// Unknown names and unknown parameter keys raise ValidationError.
std::unique_ptr<Predictor> make_predictor(std::string_view name, const ParamMap& overrides = {});

}  // namespace heurevo
