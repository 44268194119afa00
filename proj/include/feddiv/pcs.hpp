#pragma once

#include <cstddef>
#include <vector>

#include "feddiv/classifier.hpp"
#include "feddiv/dataset.hpp"

namespace feddiv {

inline constexpr double kBiasClamp = 1e-12;

// Client-cached estimate of the local model's class preference.
struct ClientBias {
  Vector probs;

  static ClientBias uniform(int num_classes);
  void validate() const;  // throws std::logic_error off the simplex
};

// logits - xi * log(max(bias, 1e-12)).
Vector debias_logits(const Vector& logits, const ClientBias& bias, double xi);

// A sample offered to the sampler: a clean sample with its given label or a
// relabeled one carrying the global pseudo-label.
struct Candidate {
  std::size_t index;  // position within the client dataset
  int label;
};

// Keeps the candidates on which the global model's argmax agrees with the
// local model's de-biased argmax. `global_labels[i]` is the global argmax
// for dataset row i, computed once per round.
std::vector<Candidate> reselect(const LabeledDataset& data, const std::vector<Candidate>& candidates,
                                const std::vector<int>& global_labels, const ModelParams& local_model,
                                const ClientBias& bias, double xi);

// Same, computing the global argmax on the fly.
std::vector<Candidate> reselect(const LabeledDataset& data, const std::vector<Candidate>& candidates,
                                const ModelParams& global_model, const ModelParams& local_model,
                                const ClientBias& bias, double xi);

// The re-selected set when the estimated noise level reaches `threshold`,
// otherwise the client's full data with given labels.
std::vector<Candidate> choose_training_set(double noise_level, const std::vector<Candidate>& reselected,
                                           const LabeledDataset& original, double threshold = 0.1);

ClientBias update_bias(const ClientBias& bias, const ModelParams& trained_model,
                       const LabeledDataset& data, double momentum);

}  // namespace feddiv
