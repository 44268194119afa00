#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace feddiv {

// Each stream is keyed by (seed, purpose, round, client) so the draws a
// client sees do not depend on the order in which clients are processed.
enum class Purpose : std::uint64_t {
  kDataset = 1,
  kSplit = 2,
  kPartition = 3,
  kNoise = 4,
  kModelInit = 5,
  kSelection = 6,
  kLocalTrain = 7,
  kTest = 8,
};

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  // Child stream for one (purpose, round, client) coordinate. Forking does
  // not advance the parent.
  RngStream fork(Purpose purpose, std::uint64_t round = 0,
                 std::uint64_t client = 0) const;

  std::uint64_t key() const { return key_; }
  std::mt19937_64& engine() { return engine_; }

  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  double gamma(double shape);
  double beta(double a, double b);
  bool bernoulli(double p);
  std::size_t index(std::size_t n);  // uniform in [0, n)
  std::vector<double> dirichlet(double alpha, std::size_t dims);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates with our own index draw; std::shuffle's sequence is
    // implementation-defined.
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  RngStream(std::uint64_t key, bool);

  std::uint64_t key_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace feddiv
