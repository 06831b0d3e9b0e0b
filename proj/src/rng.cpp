#include "greybox/rng.h"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace greybox {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) {
  return mix64(mix64(parent) ^ (tag * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(derive_seed(seed, stream)) {}

std::uint64_t CounterRng::next_u64() {
  // Two rounds keep consecutive counters decorrelated for nearby keys.
  return mix64(mix64(key_ ^ counter_++) + key_);
}

double CounterRng::uniform() {
  // 53 random mantissa bits, shifted off zero.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double CounterRng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector CounterRng::normal_vector(Eigen::Index n) {
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal();
  return z;
}

Matrix CounterRng::normal_matrix(Eigen::Index n, Eigen::Index m) {
  Matrix z(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) z(i, j) = normal();
  return z;
}

namespace {

std::vector<int> first_primes(int count) {
  std::vector<int> primes;
  for (int c = 2; static_cast<int>(primes.size()) < count; ++c) {
    bool prime = true;
    for (int p : primes) {
      if (p * p > c) break;
      if (c % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(c);
  }
  return primes;
}

}  // namespace

PointSet scrambled_halton(int n, int d, std::uint64_t seed) {
  if (n < 0 || d < 1) throw std::invalid_argument("scrambled_halton: need n >= 0 and d >= 1");
  const std::vector<int> primes = first_primes(d);
  PointSet out(d, n);
  for (int dim = 0; dim < d; ++dim) {
    const int base = primes[dim];
    // Enough digits to resolve double precision in this base.
    const int digits = static_cast<int>(std::ceil(53.0 * std::log(2.0) / std::log(base)));
    std::vector<std::vector<int>> perms(digits);
    CounterRng rng(seed, static_cast<std::uint64_t>(dim) + 1);
    for (auto& perm : perms) {
      perm.resize(base);
      std::iota(perm.begin(), perm.end(), 0);
      // Zero is permuted too (trailing zeros included), otherwise base 2
      // would be left unscrambled.
      for (int i = base - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[i], perm[j]);
      }
    }
    for (int i = 0; i < n; ++i) {
      std::uint64_t index = static_cast<std::uint64_t>(i) + 1;
      double value = 0.0;
      double scale = 1.0 / base;
      for (int pos = 0; pos < digits; ++pos) {
        const int digit = static_cast<int>(index % base);
        value += perms[pos][digit] * scale;
        index /= base;
        scale /= base;
      }
      out(dim, i) = value;
    }
  }
  return out;
}

}  // namespace greybox
