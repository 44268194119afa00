#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "feddiv/classifier.hpp"
#include "feddiv/dataset.hpp"
#include "feddiv/noise_filter.hpp"

namespace feddiv {

// Fraction of positions where the predicted clean flag matches the truth.
double filtering_accuracy(const std::vector<bool>& predicted_clean, const std::vector<bool>& clean_mask);

// Predicted flags from a split over n samples.
std::vector<bool> clean_flags(const FilterSplit& split, std::size_t n);

double test_accuracy(const ModelParams& model, const LabeledDataset& test);

// Unweighted mean over participants of ||theta_k - theta||^2.
double training_stability(const std::vector<ModelParams>& local_models, const ModelParams& global_model);

// counts[true][predicted] over a dataset's true labels.
std::vector<std::vector<std::size_t>> confusion_matrix(const ModelParams& model, const LabeledDataset& data);

struct ClientRoundStats {
  std::size_t client = 0;
  std::size_t num_samples = 0;
  double true_noise_level = 0.0;      // delta_k
  double realized_noise_rate = 0.0;   // fraction with given != true
  double estimated_noise_level = 0.0; // delta_hat_k
  std::optional<double> filtering_accuracy;
  std::size_t clean = 0;
  std::size_t noisy = 0;
  std::size_t relabeled = 0;
  std::size_t relabeled_correct = 0;
  std::size_t reselected = 0;  // size of the training set used in the last trained epoch
  std::size_t starved_epochs = 0;
  bool starved_round = false;
  std::optional<GmmParams> local_filter;
  std::vector<std::vector<std::size_t>> confusion;  // empty unless requested
};

struct RoundRecord {
  int round = 0;
  std::string phase;  // "initial", "warmup" or "train"
  double test_accuracy = 0.0;
  double training_stability = 0.0;
  std::vector<ClientRoundStats> clients;
  std::optional<GmmParams> global_filter;  // filter in force after the round
  double wall_seconds = 0.0;

  // Mean over participants that report one; nullopt when none do.
  std::optional<double> mean_filtering_accuracy() const;
};

}  // namespace feddiv
