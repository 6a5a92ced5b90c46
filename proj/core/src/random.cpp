#include "heurevo/random.hpp"

#include <cmath>

namespace heurevo {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(root);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k));
  return h;
}

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double RandomSampler::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng_);
}

double RandomSampler::normal(double mean, double stddev) {
  if (stddev <= 0.0) return mean;
  return std::normal_distribution<double>(mean, stddev)(rng_);
}

double RandomSampler::laplace(double loc, double scale) {
  // Inverse CDF on u in (-1/2, 1/2).
  double u = 0.0;
  do {
    u = std::uniform_real_distribution<double>(-0.5, 0.5)(rng_);
  } while (u == -0.5);
  const double sign = u < 0.0 ? -1.0 : 1.0;
  return loc - scale * sign * std::log1p(-2.0 * std::abs(u));
}

}  // namespace heurevo
