#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "feddiv/classifier.hpp"
#include "feddiv/dataset.hpp"

namespace feddiv {

inline constexpr double kVarianceFloor = 1e-6;

// Two-component mixture over scalar per-sample losses. Component 0 is the
// "clean" one and always has the smaller mean. `variance` holds sigma^2.
struct GmmParams {
  std::array<double, 2> mean{0.0, 1.0};
  std::array<double, 2> variance{1.0, 1.0};
  std::array<double, 2> weight{0.5, 0.5};

  void validate() const;  // throws std::logic_error
  double log_likelihood(const std::vector<double>& losses) const;

  // mean = (0.5 log C, 2 log C), unit variances, equal weights.
  static GmmParams cold_start(int num_classes);
};

// P(clean | loss), computed in log space.
double gmm_posterior_clean(double loss, const GmmParams& filter);

struct GmmFit {
  GmmParams params;
  int iterations = 0;
  bool degenerate = false;
  bool converged = false;
  // Log-likelihood of the parameters entering each iteration, then of the
  // returned parameters.
  std::vector<double> log_likelihood;
};

GmmFit fit_local_gmm(const std::vector<double>& losses, const GmmParams& init, int max_iters = 100,
                     double tolerance = 1e-6);

struct FilterBankEntry {
  GmmParams filter;
  std::size_t num_samples = 0;
  int last_round = -1;  // -1 until the client first reports
};

struct FilterBank {
  std::vector<FilterBankEntry> entries;

  static FilterBank cold_start(const std::vector<std::size_t>& client_sizes, int num_classes);
  void update(std::size_t client, const GmmParams& filter, int round);
};

// n_k-weighted average of every parameter over all entries.
GmmParams aggregate_filters(const FilterBank& bank);
// Same, restricted to `clients`.
GmmParams aggregate_filters(const FilterBank& bank, const std::vector<std::size_t>& clients);

struct FilterSplit {
  std::vector<std::size_t> clean;
  std::vector<std::size_t> noisy;
  double noise_level = 0.0;  // |noisy| / n
};

FilterSplit filter_split(const std::vector<double>& losses, const GmmParams& filter,
                         double threshold = 0.5);

struct Relabeled {
  std::size_t index;  // position within the client dataset
  int label;
};

// Noisy samples whose global-model confidence reaches zeta, labelled with
// the global argmax.
std::vector<Relabeled> relabel(const LabeledDataset& data, const std::vector<std::size_t>& noisy,
                               const ModelParams& global_model, double zeta);

}  // namespace feddiv
