#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace heurevo {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Deterministically derives a child seed from a root seed and a list of
/// use-site keys, so independent streams never depend on call order.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> keys);

/// FNV-1a, stable across platforms (std::hash is not).
std::uint64_t stable_hash(std::string_view text);

/// Source of the draws the stochastic predictors need.
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual double uniform(double lo, double hi) = 0;
  virtual double normal(double mean, double stddev) = 0;
  virtual double laplace(double loc, double scale) = 0;
};

class RandomSampler final : public Sampler {
 public:
  explicit RandomSampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) override;
  double normal(double mean, double stddev) override;
  double laplace(double loc, double scale) override;

 private:
  Rng rng_;
};

/// Test hook: every draw returns the centre of its distribution (uniform ->
/// midpoint, normal/laplace -> location), i.e. all random deviations are zero.
class CenteredSampler final : public Sampler {
 public:
  double uniform(double lo, double hi) override { return 0.5 * (lo + hi); }
  double normal(double mean, double) override { return mean; }
  double laplace(double loc, double) override { return loc; }
};

}  // namespace heurevo
