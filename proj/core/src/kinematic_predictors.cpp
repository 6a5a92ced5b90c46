#include <cmath>
#include <numbers>
#include <string>

#include "heurevo/error.hpp"
#include "heurevo/predictors.hpp"

namespace heurevo {

namespace {

void require_history(const TrajTensor& history, std::size_t min_frames, std::size_t k,
                     std::size_t t_pred, const char* who) {
  if (history.num_frames() < min_frames) {
    throw ValidationError(std::string(who) + " needs at least " + std::to_string(min_frames) +
                          " history frames, got " + std::to_string(history.num_frames()));
  }
  if (k == 0 || t_pred == 0) throw ValidationError(std::string(who) + ": K and T_pred must be positive");
  history.check_finite(who);
}

/// Copies set 0 into every other set.
void replicate_first(PredictionSet& out) {
  const std::size_t block = out.num_agents() * out.num_frames() * 2;
  auto data = out.data();
  for (std::size_t k = 1; k < out.k(); ++k) {
    std::copy(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(block),
              data.begin() + static_cast<std::ptrdiff_t>(k * block));
  }
}

Vec2 last_step(const TrajTensor& h, std::size_t agent) {
  const std::size_t n = h.num_frames();
  return h.at(agent, n - 1) - h.at(agent, n - 2);
}

Vec2 prev_step(const TrajTensor& h, std::size_t agent) {
  const std::size_t n = h.num_frames();
  return h.at(agent, n - 2) - h.at(agent, n - 3);
}

double wrap_angle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

}  // namespace

Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

PredictionSet cvm(const TrajTensor& history, std::size_t k, std::size_t t_pred) {
  require_history(history, 2, k, t_pred, "cvm");
  PredictionSet out(k, history.num_agents(), t_pred, history.unit());
  for (std::size_t a = 0; a < history.num_agents(); ++a) {
    const Vec2 start = history.last(a);
    const Vec2 v = last_step(history, a);
    for (std::size_t t = 0; t < t_pred; ++t) {
      out.set(0, a, t, start + v * static_cast<double>(t + 1));
    }
  }
  replicate_first(out);
  return out;
}

PredictionSet cvm_s(const TrajTensor& history, std::size_t k, std::size_t t_pred,
                    double angle_sigma, std::uint64_t seed) {
  require_history(history, 2, k, t_pred, "cvm_s");
  if (!(angle_sigma > 0.0)) throw ValidationError("cvm_s: angle_sigma must be positive");
  PredictionSet out = cvm(history, k, t_pred);
  RandomSampler sampler(seed);
  for (std::size_t s = 1; s < k; ++s) {
    for (std::size_t a = 0; a < history.num_agents(); ++a) {
      const Vec2 start = history.last(a);
      const Vec2 v = rotate(last_step(history, a), sampler.normal(0.0, angle_sigma));
      for (std::size_t t = 0; t < t_pred; ++t) {
        out.set(s, a, t, start + v * static_cast<double>(t + 1));
      }
    }
  }
  return out;
}

PredictionSet constant_acc(const TrajTensor& history, std::size_t k, std::size_t t_pred) {
  require_history(history, 3, k, t_pred, "constant_acc");
  PredictionSet out(k, history.num_agents(), t_pred, history.unit());
  for (std::size_t a = 0; a < history.num_agents(); ++a) {
    Vec2 pos = history.last(a);
    Vec2 v = last_step(history, a);
    const Vec2 acc = v - prev_step(history, a);
    for (std::size_t t = 0; t < t_pred; ++t) {
      v += acc;
      pos += v;
      out.set(0, a, t, pos);
    }
  }
  replicate_first(out);
  return out;
}

PredictionSet ctrv(const TrajTensor& history, std::size_t k, std::size_t t_pred,
                   double omega_eps) {
  require_history(history, 3, k, t_pred, "ctrv");
  PredictionSet out(k, history.num_agents(), t_pred, history.unit());
  for (std::size_t a = 0; a < history.num_agents(); ++a) {
    const Vec2 d1 = last_step(history, a);
    const Vec2 d0 = prev_step(history, a);
    const double speed = d1.norm();
    double omega = 0.0;
    if (speed > 0.0 && d0.norm() > 0.0) {
      omega = wrap_angle(std::atan2(d1.y, d1.x) - std::atan2(d0.y, d0.x));
    }
    Vec2 pos = history.last(a);
    if (std::abs(omega) < omega_eps) {
      for (std::size_t t = 0; t < t_pred; ++t) {
        out.set(0, a, t, pos + d1 * static_cast<double>(t + 1));
      }
      continue;
    }
    double heading = std::atan2(d1.y, d1.x);
    for (std::size_t t = 0; t < t_pred; ++t) {
      heading += omega;
      pos += Vec2{speed * std::cos(heading), speed * std::sin(heading)};
      out.set(0, a, t, pos);
    }
  }
  replicate_first(out);
  return out;
}

PredictionSet linreg(const TrajTensor& history, std::size_t k, std::size_t t_pred) {
  require_history(history, 2, k, t_pred, "linreg");
  const std::size_t n = history.num_frames();
  const double mean_t = 0.5 * static_cast<double>(n - 1);
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - mean_t;
    sxx += d * d;
  }
  PredictionSet out(k, history.num_agents(), t_pred, history.unit());
  for (std::size_t a = 0; a < history.num_agents(); ++a) {
    Vec2 mean{};
    for (std::size_t i = 0; i < n; ++i) mean += history.at(a, i);
    mean = mean / static_cast<double>(n);
    Vec2 sxy{};
    for (std::size_t i = 0; i < n; ++i) {
      sxy += (history.at(a, i) - mean) * (static_cast<double>(i) - mean_t);
    }
    const Vec2 slope = sxy / sxx;
    for (std::size_t t = 0; t < t_pred; ++t) {
      const double x = static_cast<double>(n - 1 + t + 1) - mean_t;
      out.set(0, a, t, mean + slope * x);
    }
  }
  replicate_first(out);
  return out;
}

PredictionSet social_force(const TrajTensor& history, std::size_t k, std::size_t t_pred,
                           const SocialForceParams& p, std::uint64_t seed) {
  require_history(history, 2, k, t_pred, "social_force");
  if (!(p.dt > 0.0) || !(p.tau > 0.0) || !(p.range > 0.0)) {
    throw ValidationError("social_force: dt, tau and range must be positive");
  }
  const std::size_t agents = history.num_agents();
  PredictionSet out(k, agents, t_pred, history.unit());
  RandomSampler sampler(seed);

  std::vector<Vec2> goal(agents), pos(agents), vel(agents), force(agents);
  std::vector<double> speed0(agents);
  for (std::size_t s = 0; s < k; ++s) {
    const double strength =
        s == 0 ? p.strength
               : p.strength * sampler.uniform(1.0 - p.strength_jitter, 1.0 + p.strength_jitter);
    for (std::size_t a = 0; a < agents; ++a) {
      const Vec2 step = last_step(history, a);
      pos[a] = history.last(a);
      vel[a] = step / p.dt;
      speed0[a] = vel[a].norm();
      goal[a] = pos[a] + step * static_cast<double>(t_pred);
    }
    for (std::size_t t = 0; t < t_pred; ++t) {
      for (std::size_t a = 0; a < agents; ++a) {
        const Vec2 to_goal = goal[a] - pos[a];
        const double dist = to_goal.norm();
        const Vec2 desired = dist > 1e-12 ? to_goal * (speed0[a] / dist) : Vec2{};
        Vec2 f = (desired - vel[a]) / p.tau;
        if (strength != 0.0) {
          for (std::size_t o = 0; o < agents; ++o) {
            if (o == a) continue;
            const Vec2 diff = pos[a] - pos[o];
            const double d = diff.norm();
            if (d > 0.0 && d < p.radius) f += diff * (strength * std::exp(-d / p.range) / d);
          }
        }
        force[a] = f;
      }
      for (std::size_t a = 0; a < agents; ++a) {
        vel[a] += force[a] * p.dt;
        const double vmax = p.vmax_factor * speed0[a];
        const double sp = vel[a].norm();
        if (sp > vmax) vel[a] = sp > 0.0 ? vel[a] * (vmax / sp) : Vec2{};
        pos[a] += vel[a] * p.dt;
        out.set(s, a, t, pos[a]);
      }
    }
  }
  return out;
}

}  // namespace heurevo
