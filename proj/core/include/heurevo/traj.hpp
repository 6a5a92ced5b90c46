#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace heurevo {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend Vec2 operator*(double s, Vec2 a) { return {a.x * s, a.y * s}; }
  friend Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
  friend bool operator==(Vec2, Vec2) = default;

  double norm() const { return std::hypot(x, y); }
};

enum class Unit { kMeters, kPixels };

std::string to_string(Unit unit);

/// Positions laid out as [num_agents x num_frames x 2], row-major.
class TrajTensor {
 public:
  TrajTensor() = default;
  TrajTensor(std::size_t num_agents, std::size_t num_frames, Unit unit = Unit::kMeters);

  std::size_t num_agents() const noexcept { return num_agents_; }
  std::size_t num_frames() const noexcept { return num_frames_; }
  Unit unit() const noexcept { return unit_; }
  bool empty() const noexcept { return data_.empty(); }

  Vec2 at(std::size_t agent, std::size_t frame) const {
    const std::size_t i = offset(agent, frame);
    return {data_[i], data_[i + 1]};
  }
  void set(std::size_t agent, std::size_t frame, Vec2 p) {
    const std::size_t i = offset(agent, frame);
    data_[i] = p.x;
    data_[i + 1] = p.y;
  }
  /// Last observed position of an agent.
  Vec2 last(std::size_t agent) const { return at(agent, num_frames_ - 1); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool all_finite() const;
  /// Throws ValidationError when any coordinate is NaN or infinite.
  void check_finite(const char* what) const;

  /// Returns a copy shifted by a constant vector.
  TrajTensor translated(Vec2 offset) const;
  /// Frames [first, first + count) of every agent.
  TrajTensor slice_frames(std::size_t first, std::size_t count) const;

  friend bool operator==(const TrajTensor&, const TrajTensor&) = default;

 private:
  std::size_t offset(std::size_t agent, std::size_t frame) const {
    return (agent * num_frames_ + frame) * 2;
  }

  std::size_t num_agents_ = 0;
  std::size_t num_frames_ = 0;
  Unit unit_ = Unit::kMeters;
  std::vector<double> data_;
};

/// One prediction instance.
struct Scene {
  TrajTensor history;
  TrajTensor future;
  std::string scene_id;

  std::size_t num_agents() const noexcept { return history.num_agents(); }
  /// Throws ContractError when history and future disagree on agents or unit.
  void validate() const;
};

/// K candidate futures, laid out as [K x num_agents x T_pred x 2].
class PredictionSet {
 public:
  PredictionSet() = default;
  PredictionSet(std::size_t k, std::size_t num_agents, std::size_t num_frames,
                Unit unit = Unit::kMeters);

  std::size_t k() const noexcept { return k_; }
  std::size_t num_agents() const noexcept { return num_agents_; }
  std::size_t num_frames() const noexcept { return num_frames_; }
  Unit unit() const noexcept { return unit_; }

  Vec2 at(std::size_t k, std::size_t agent, std::size_t frame) const {
    const std::size_t i = offset(k, agent, frame);
    return {data_[i], data_[i + 1]};
  }
  void set(std::size_t k, std::size_t agent, std::size_t frame, Vec2 p) {
    const std::size_t i = offset(k, agent, frame);
    data_[i] = p.x;
    data_[i + 1] = p.y;
  }

  /// Copy of set k as a standalone tensor.
  TrajTensor sample(std::size_t k) const;
  /// Overwrites set k with a tensor of matching shape.
  void set_sample(std::size_t k, const TrajTensor& traj);

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool all_finite() const;

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;

 private:
  std::size_t offset(std::size_t k, std::size_t agent, std::size_t frame) const {
    return ((k * num_agents_ + agent) * num_frames_ + frame) * 2;
  }

  std::size_t k_ = 0;
  std::size_t num_agents_ = 0;
  std::size_t num_frames_ = 0;
  Unit unit_ = Unit::kMeters;
  std::vector<double> data_;
};

}  // namespace heurevo
