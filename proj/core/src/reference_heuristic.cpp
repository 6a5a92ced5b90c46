// Native port of the best evolved Zara1 heuristic. Draw order mirrors the
// original numpy program so a given sampler stream maps to one output.
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "heurevo/error.hpp"
#include "heurevo/predictors.hpp"

namespace heurevo {

namespace {

constexpr std::size_t kDominantSets = 14;  // sets [0, 14): averaged velocity
constexpr std::size_t kRotationSets = 17;  // sets [14, 17): rotated last step
constexpr std::size_t kSocialSets = 19;    // sets [17, 19): smoothed + repulsion
constexpr std::size_t kVariationPeriod = 6;

/// Row-vector times rotation matrix, i.e. v @ [[c, -s], [s, c]].
Vec2 row_rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {v.x * c + v.y * s, -v.x * s + v.y * c};
}

double mean_speed(const std::vector<Vec2>& v) {
  double sum = 0.0;
  for (const Vec2& x : v) sum += x.norm();
  return sum / static_cast<double>(v.size());
}

/// Noise tensor [agents x t_pred] of 2-vectors, filled in C order.
std::vector<Vec2> normal_noise(Sampler& s, std::size_t agents, std::size_t t_pred,
                               double scale) {
  std::vector<Vec2> noise(agents * t_pred);
  for (Vec2& n : noise) {
    n.x = s.normal(0.0, scale);
    n.y = s.normal(0.0, scale);
  }
  return noise;
}

Vec2 step_back(const TrajTensor& h, std::size_t agent, std::size_t back) {
  // P[-1 - back] - P[-2 - back]
  const std::size_t n = h.num_frames();
  return h.at(agent, n - 1 - back) - h.at(agent, n - 2 - back);
}

}  // namespace

PredictionSet reference_zara1(const TrajTensor& history, std::size_t k, std::size_t t_pred,
                              Sampler& sampler) {
  if (k != kDefaultSamples) {
    throw ValidationError("trajevo_zara1 requires K == 20, got " + std::to_string(k));
  }
  if (history.num_frames() < 2) throw ValidationError("trajevo_zara1 needs at least 2 frames");
  if (t_pred == 0) throw ValidationError("trajevo_zara1: T_pred must be positive");
  history.check_finite("trajevo_zara1");

  const std::size_t agents = history.num_agents();
  const std::size_t len = history.num_frames();
  PredictionSet out(k, agents, t_pred, history.unit());
  std::vector<Vec2> vel(agents), pos(agents);

  auto last_velocity = [&](std::size_t a) { return step_back(history, a, 0); };

  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t a = 0; a < agents; ++a) pos[a] = history.last(a);

    if (i < kDominantSets) {
      const double decay = sampler.uniform(0.1, 0.3);
      const std::size_t window = std::min<std::size_t>(len - 1, 5);
      std::fill(vel.begin(), vel.end(), Vec2{});
      double weights_sum = 0.0;
      for (std::size_t w = 0; w < window; ++w) {
        const double weight = std::exp(-decay * static_cast<double>(w));
        for (std::size_t a = 0; a < agents; ++a) vel[a] += step_back(history, a, w) * weight;
        weights_sum += weight;
      }
      for (Vec2& v : vel) v = v / (weights_sum + 1e-8);

      const double avg_speed = mean_speed(vel);
      double noise_scale = 0.012 + avg_speed * 0.008;
      auto noise = normal_noise(sampler, agents, t_pred, noise_scale);

      const double angle = sampler.uniform(-0.05, 0.05);
      for (Vec2& v : vel) v = row_rotate(v, angle);

      switch (i % kVariationPeriod) {
        case 0:
          noise_scale *= sampler.uniform(0.9, 1.1);
          noise = normal_noise(sampler, agents, t_pred, noise_scale);
          break;
        case 1: {
          const double angle_scale = 0.06 + avg_speed * 0.02;
          const double lo = -angle_scale * sampler.uniform(0.8, 1.2);
          const double hi = angle_scale * sampler.uniform(0.8, 1.2);
          const double turn = sampler.uniform(lo, hi);
          for (Vec2& v : vel) v = row_rotate(v, turn);
          break;
        }
        case 2: {
          const double momentum = sampler.uniform(0.06, 0.14);
          for (std::size_t a = 0; a < agents; ++a) {
            vel[a] = vel[a] * momentum + last_velocity(a) * (1.0 - momentum);
          }
          break;
        }
        case 3: {
          const double jerk_factor = sampler.uniform(0.0025, 0.0065);
          if (len > 2) {
            for (std::size_t a = 0; a < agents; ++a) {
              const Vec2 jerk = history.at(a, len - 1) - history.at(a, len - 2) * 2.0 +
                                history.at(a, len - 3);
              vel[a] += jerk * jerk_factor;
            }
          }
          break;
        }
        case 4: {
          const double damping = sampler.uniform(0.006, 0.019);
          for (Vec2& v : vel) v = v * (1.0 - damping);
          break;
        }
        default:
          noise_scale = 0.01 + avg_speed * sampler.uniform(0.006, 0.014);
          noise = normal_noise(sampler, agents, t_pred, noise_scale);
          break;
      }

      for (std::size_t t = 0; t < t_pred; ++t) {
        const double atten = std::pow(static_cast<double>(t + 1), 0.4);
        for (std::size_t a = 0; a < agents; ++a) {
          pos[a] = pos[a] + vel[a] + noise[a * t_pred + t] / atten;
          out.set(i, a, t, pos[a]);
        }
      }
    } else if (i < kRotationSets) {
      for (std::size_t a = 0; a < agents; ++a) vel[a] = last_velocity(a);
      const double avg_speed = mean_speed(vel);
      const double angle_scale = 0.13 + avg_speed * 0.05;
      const double angle = sampler.uniform(-angle_scale, angle_scale);
      for (Vec2& v : vel) v = row_rotate(v, angle);
      const double noise_scale = 0.007 + avg_speed * 0.004;
      const auto noise = normal_noise(sampler, agents, t_pred, noise_scale);
      for (std::size_t t = 0; t < t_pred; ++t) {
        const double atten = std::pow(static_cast<double>(t + 1), 0.5);
        for (std::size_t a = 0; a < agents; ++a) {
          pos[a] = pos[a] + vel[a] + noise[a * t_pred + t] / atten;
          out.set(i, a, t, pos[a]);
        }
      }
    } else if (i < kSocialSets) {
      for (std::size_t a = 0; a < agents; ++a) {
        const Vec2 v = last_velocity(a);
        if (len > 3) {
          vel[a] = v * 0.55 + step_back(history, a, 1) * 0.3 + step_back(history, a, 2) * 0.15;
        } else if (len > 2) {
          vel[a] = v * 0.65 + step_back(history, a, 1) * 0.35;
        } else {
          vel[a] = v;
        }
      }
      const double avg_speed = mean_speed(vel);
      const double noise_scale = 0.005 + avg_speed * 0.0015;
      for (Vec2& v : vel) {
        const double nx = sampler.laplace(0.0, noise_scale);
        const double ny = sampler.laplace(0.0, noise_scale);
        v += Vec2{nx, ny};
      }
      constexpr double kRepulsion = 0.0011;
      std::vector<Vec2> net(agents);
      for (std::size_t t = 0; t < t_pred; ++t) {
        std::fill(net.begin(), net.end(), Vec2{});
        for (std::size_t a = 0; a < agents; ++a) {
          for (std::size_t o = 0; o < agents; ++o) {
            if (a == o) continue;
            const Vec2 dir = pos[a] - pos[o];
            const double dist = dir.norm();
            if (dist < 1.05) net[a] += (dir / (dist + 1e-6)) * kRepulsion * std::exp(-dist);
          }
        }
        for (std::size_t a = 0; a < agents; ++a) {
          vel[a] = vel[a] * 0.9 + net[a] * 0.1;
          pos[a] = pos[a] + vel[a];
          out.set(i, a, t, pos[a]);
        }
      }
    } else {
      for (std::size_t a = 0; a < agents; ++a) vel[a] = last_velocity(a);
      const double damping = sampler.uniform(0.017, 0.038);
      const auto noise = normal_noise(sampler, agents, t_pred, 0.028);
      for (std::size_t t = 0; t < t_pred; ++t) {
        const double atten = std::pow(static_cast<double>(t + 1), 0.4);
        for (std::size_t a = 0; a < agents; ++a) {
          vel[a] = vel[a] * (1.0 - damping) + noise[a * t_pred + t] / atten;
          pos[a] = pos[a] + vel[a];
          out.set(i, a, t, pos[a]);
        }
      }
    }
  }
  return out;
}

PredictionSet reference_zara1(const TrajTensor& history, std::size_t k, std::size_t t_pred,
                              std::uint64_t seed) {
  RandomSampler sampler(seed);
  return reference_zara1(history, k, t_pred, sampler);
}

}  // namespace heurevo
