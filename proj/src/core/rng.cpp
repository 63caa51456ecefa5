#include "voxtr/core/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace voxtr {

double Rng::normal() {
  // Box-Muller; u1 nudged away from zero so the log stays finite.
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::truncated_normal(double std_dev) {
  for (;;) {
    double v = normal();
    if (std::fabs(v) <= 2.0) return v * std_dev;
  }
}

std::vector<long> Rng::permutation(long n) {
  std::vector<long> p(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
  for (long i = n - 1; i > 0; --i) {
    long j = uniform_int(i + 1);
    std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
  }
  return p;
}

std::vector<long> Rng::sample_without_replacement(long n, long k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<long> p = permutation(n);
  p.resize(static_cast<size_t>(k));
  return p;
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
  // splitmix64 finalizer over the xor of the two inputs.
  uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t hash_string(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace voxtr
