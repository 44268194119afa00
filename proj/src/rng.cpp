#include "feddiv/rng.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace feddiv {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : RngStream(splitmix64(seed), true) {}

RngStream::RngStream(std::uint64_t key, bool) : key_(key), engine_(key) {}

RngStream RngStream::fork(Purpose purpose, std::uint64_t round,
                          std::uint64_t client) const {
  std::uint64_t k = splitmix64(key_ ^ static_cast<std::uint64_t>(purpose));
  k = splitmix64(k ^ round);
  k = splitmix64(k ^ (client * 0xD1B54A32D192ED03ULL));
  return RngStream(k, true);
}

double RngStream::uniform() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::normal(double mean, double stddev) {
  // Box-Muller; one value per call keeps the stream position simple.
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * M_PI * u2);
}

double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("gamma shape must be > 0");
  if (shape < 1.0) {
    // Boost to shape + 1 and rescale.
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v;
  }
}

double RngStream::beta(double a, double b) {
  double x = gamma(a);
  double y = gamma(b);
  if (x + y <= 0.0) return 0.5;
  return x / (x + y);
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

std::size_t RngStream::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("index: empty range");
  // Lemire-style rejection to avoid modulo bias.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

std::vector<double> RngStream::dirichlet(double alpha, std::size_t dims) {
  std::vector<double> g(dims);
  for (auto& v : g) v = gamma(alpha);
  double total = std::accumulate(g.begin(), g.end(), 0.0);
  if (!(total > 0.0)) {
    // All draws underflowed (tiny alpha): the limit is a random vertex.
    std::fill(g.begin(), g.end(), 0.0);
    g[index(dims)] = 1.0;
    return g;
  }
  for (auto& v : g) v /= total;
  return g;
}

}  // namespace feddiv
