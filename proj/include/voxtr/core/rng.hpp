#ifndef VOXTR_CORE_RNG_HPP_
#define VOXTR_CORE_RNG_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace voxtr {

// Deterministic RNG. std:: distributions are implementation-defined, so the
// distributions here are written out explicitly; the same seed yields the
// same stream on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is below 2^-53 for any n that
  // fits in a long; fine for shuffling and sampling.
  long uniform_int(long n) { return static_cast<long>(gen_() % static_cast<uint64_t>(n)); }

  // Standard normal via Box-Muller.
  double normal();

  // Normal(0, std) with samples outside [-2*std, 2*std] redrawn.
  double truncated_normal(double std_dev);

  // Fisher-Yates permutation of 0..n-1.
  std::vector<long> permutation(long n);

  // k distinct values sampled from 0..n-1, in draw order.
  std::vector<long> sample_without_replacement(long n, long k);

 private:
  std::mt19937_64 gen_;
};

// Cheap stateless mixer for deriving stream seeds from a base seed plus a
// label (object id hash, step counter, ...).
uint64_t mix_seed(uint64_t a, uint64_t b);
uint64_t hash_string(const std::string& s);

}  // namespace voxtr

#endif  // VOXTR_CORE_RNG_HPP_
