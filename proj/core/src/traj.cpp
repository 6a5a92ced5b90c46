#include "heurevo/traj.hpp"

#include <algorithm>
#include <string>

#include "heurevo/error.hpp"

namespace heurevo {

namespace {

bool finite_span(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace

std::string to_string(Unit unit) {
  return unit == Unit::kMeters ? "meters" : "pixels";
}

TrajTensor::TrajTensor(std::size_t num_agents, std::size_t num_frames, Unit unit)
    : num_agents_(num_agents),
      num_frames_(num_frames),
      unit_(unit),
      data_(num_agents * num_frames * 2, 0.0) {}

bool TrajTensor::all_finite() const { return finite_span(data_); }

void TrajTensor::check_finite(const char* what) const {
  if (!all_finite()) {
    throw ValidationError(std::string(what) + " contains non-finite positions");
  }
}

TrajTensor TrajTensor::translated(Vec2 delta) const {
  TrajTensor out = *this;
  for (std::size_t i = 0; i < out.data_.size(); i += 2) {
    out.data_[i] += delta.x;
    out.data_[i + 1] += delta.y;
  }
  return out;
}

TrajTensor TrajTensor::slice_frames(std::size_t first, std::size_t count) const {
  if (first + count > num_frames_) {
    throw ContractError("slice_frames: range [" + std::to_string(first) + ", " +
                        std::to_string(first + count) + ") exceeds " +
                        std::to_string(num_frames_) + " frames");
  }
  TrajTensor out(num_agents_, count, unit_);
  for (std::size_t a = 0; a < num_agents_; ++a) {
    for (std::size_t t = 0; t < count; ++t) out.set(a, t, at(a, first + t));
  }
  return out;
}

void Scene::validate() const {
  if (history.num_agents() != future.num_agents()) {
    throw ContractError("scene " + scene_id + ": history has " +
                        std::to_string(history.num_agents()) + " agents, future has " +
                        std::to_string(future.num_agents()));
  }
  if (history.unit() != future.unit()) {
    throw ContractError("scene " + scene_id + ": history and future units differ");
  }
}

PredictionSet::PredictionSet(std::size_t k, std::size_t num_agents, std::size_t num_frames,
                             Unit unit)
    : k_(k),
      num_agents_(num_agents),
      num_frames_(num_frames),
      unit_(unit),
      data_(k * num_agents * num_frames * 2, 0.0) {}

TrajTensor PredictionSet::sample(std::size_t k) const {
  if (k >= k_) throw ContractError("sample index out of range");
  TrajTensor out(num_agents_, num_frames_, unit_);
  const auto first = data_.begin() + static_cast<std::ptrdiff_t>(offset(k, 0, 0));
  std::copy(first, first + static_cast<std::ptrdiff_t>(num_agents_ * num_frames_ * 2),
            out.data().begin());
  return out;
}

void PredictionSet::set_sample(std::size_t k, const TrajTensor& traj) {
  if (k >= k_ || traj.num_agents() != num_agents_ || traj.num_frames() != num_frames_) {
    throw ContractError("set_sample: shape mismatch");
  }
  std::copy(traj.data().begin(), traj.data().end(),
            data_.begin() + static_cast<std::ptrdiff_t>(offset(k, 0, 0)));
}

bool PredictionSet::all_finite() const { return finite_span(data_); }

}  // namespace heurevo
