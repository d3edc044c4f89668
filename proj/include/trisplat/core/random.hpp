#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace trisplat {

using Rng = std::mt19937_64;

// Distribution objects are constructed per call so the engine is the only
// carried state; this keeps checkpointed runs bit-reproducible.
inline double rand_uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

inline int rand_int(Rng& rng, int lo, int hi) {  // inclusive [lo, hi]
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng);
}

inline double rand_normal(Rng& rng, double mean, double stddev) {
  std::normal_distribution<double> d(mean, stddev);
  return d(rng);
}

inline bool rand_bernoulli(Rng& rng, double p) {
  std::bernoulli_distribution d(p);
  return d(rng);
}

inline std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Rng rng_from_string(const std::string& s) {
  Rng rng;
  std::istringstream is(s);
  is >> rng;
  return rng;
}

}  // namespace trisplat
