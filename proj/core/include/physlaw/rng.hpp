#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace physlaw {

// splitmix64 finalizer; good enough for deriving independent seed streams.
uint64_t hash_mix(uint64_t x);

// Derives a child seed from a master seed, a textual tag and a salt.
// Every stochastic component in the engine pulls its seed through this so
// that a single master seed pins the entire run.
uint64_t seed_from(uint64_t master, std::string_view tag, uint64_t salt = 0);

// Deterministic random source. The gaussian variates are produced by our own
// Box-Muller transform on top of mt19937_64 so that sequences are identical
// across standard libraries (std::normal_distribution is not portable).
class Rng {
 public:
  explicit Rng(uint64_t seed = 0x9e3779b97f4a7c15ull) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }
  double uniform01();  // [0, 1)
  double normal(double mean = 0.0, double stddev = 1.0);
  // Uniform integer in [lo, hi], inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);

  // Textual state for checkpointing.
  std::string save_state() const;
  void restore_state(const std::string& s);

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace physlaw
