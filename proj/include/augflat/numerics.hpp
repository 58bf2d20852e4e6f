// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace augflat {

// splitmix64 finalizer, used to decorrelate composite seeds.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t seed_mix(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x2545f4914f6cdd1dULL;
  for (uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

inline uint64_t seed_mix(uint64_t a, uint64_t b) { return seed_mix({a, b}); }
inline uint64_t seed_mix(uint64_t a, uint64_t b, uint64_t c) { return seed_mix({a, b, c}); }
inline uint64_t seed_mix(uint64_t a, uint64_t b, uint64_t c, uint64_t d) { return seed_mix({a, b, c, d}); }

// Deterministic RNG. mt19937_64 has a standard-mandated output sequence and the
// transforms below avoid std::*_distribution, whose results vary across
// library implementations. Streams must be byte-reproducible everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(mix64(seed)) {}

  uint64_t bits() { return eng_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive on both ends.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<int64_t>(bits());  // full 64-bit range
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t r;
    do {
      r = bits();
    } while (r >= limit);
    return lo + static_cast<int64_t>(r % span);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  // Marsaglia-Tsang for shape >= 1; boosted for shape < 1.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
      double u;
      do {
        u = uniform();
      } while (u <= 0.0);
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) {
    double ga = gamma(a);
    double gb = gamma(b);
    return ga / (ga + gb);
  }

  std::vector<double> dirichlet(double alpha, int k) {
    std::vector<double> w(static_cast<size_t>(k));
    double s = 0.0;
    for (auto& wi : w) {
      wi = gamma(alpha);
      s += wi;
    }
    for (auto& wi : w) wi /= s;
    return w;
  }

  // Multiplicative (Knuth) sampler; fine for the rates used here.
  int64_t poisson(double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("poisson: rate must be >= 0");
    if (lambda == 0.0) return 0;
    double limit = std::exp(-lambda);
    double prod = 1.0;
    int64_t k = 0;
    do {
      prod *= uniform();
      ++k;
    } while (prod > limit);
    return k - 1;
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Pairwise summation keeps accumulated roundoff order-independent of the
// platform's vector units and stable across compilers at -O2.
inline double pairwise_sum(const double* data, size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

inline double pairwise_mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("pairwise_mean: empty input");
  return pairwise_sum(v) / static_cast<double>(v.size());
}

// Standard error of the sample mean.
inline double mean_stderr(const std::vector<double>& v) {
  size_t n = v.size();
  if (n < 2) return 0.0;
  double m = pairwise_mean(v);
  std::vector<double> sq(n);
  for (size_t i = 0; i < n; ++i) sq[i] = (v[i] - m) * (v[i] - m);
  double var = pairwise_sum(sq) / static_cast<double>(n - 1);
  return std::sqrt(var / static_cast<double>(n));
}

inline std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return std::string(buf);
}

}  // namespace augflat
