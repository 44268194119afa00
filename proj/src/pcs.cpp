#include "feddiv/pcs.hpp"

#include <cmath>
#include <stdexcept>

namespace feddiv {

ClientBias ClientBias::uniform(int num_classes) {
  return {Vector::Constant(num_classes, 1.0 / num_classes)};
}

void ClientBias::validate() const {
  if (probs.size() == 0) throw std::logic_error("ClientBias: empty");
  if ((probs.array() < 0.0).any()) throw std::logic_error("ClientBias: negative entry");
  if (std::abs(probs.sum() - 1.0) > 1e-9) throw std::logic_error("ClientBias: entries do not sum to 1");
}

Vector debias_logits(const Vector& logits, const ClientBias& bias, double xi) {
  if (logits.size() != bias.probs.size()) throw std::invalid_argument("debias_logits: size mismatch");
  return logits.array() - xi * bias.probs.array().max(kBiasClamp).log();
}

std::vector<Candidate> reselect(const LabeledDataset& data, const std::vector<Candidate>& candidates,
                                const std::vector<int>& global_labels, const ModelParams& local_model,
                                const ClientBias& bias, double xi) {
  std::vector<Candidate> kept;
  for (const auto& c : candidates) {
    const Vector f = debias_logits(forward_logits(local_model, data.features.at(c.index)), bias, xi);
    if (argmax(f) == global_labels.at(c.index)) kept.push_back(c);
  }
  return kept;
}

std::vector<Candidate> reselect(const LabeledDataset& data, const std::vector<Candidate>& candidates,
                                const ModelParams& global_model, const ModelParams& local_model,
                                const ClientBias& bias, double xi) {
  std::vector<Candidate> kept;
  for (const auto& c : candidates) {
    const Vector& x = data.features.at(c.index);
    const int global_label = argmax(predict_proba(global_model, x));
    const Vector f = debias_logits(forward_logits(local_model, x), bias, xi);
    if (argmax(f) == global_label) kept.push_back(c);
  }
  return kept;
}

std::vector<Candidate> choose_training_set(double noise_level, const std::vector<Candidate>& reselected,
                                           const LabeledDataset& original, double threshold) {
  if (noise_level >= threshold) return reselected;
  std::vector<Candidate> all;
  all.reserve(original.size());
  for (std::size_t i = 0; i < original.size(); ++i) all.push_back({i, original.given_labels[i]});
  return all;
}

ClientBias update_bias(const ClientBias& bias, const ModelParams& trained_model,
                       const LabeledDataset& data, double momentum) {
  if (data.empty()) throw std::invalid_argument("update_bias: empty client data");
  Vector mean = Vector::Zero(bias.probs.size());
  for (const auto& x : data.features) mean += predict_proba(trained_model, x);
  mean /= static_cast<double>(data.size());
  return {momentum * bias.probs + (1.0 - momentum) * mean};
}

}  // namespace feddiv
