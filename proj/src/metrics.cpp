#include "feddiv/metrics.hpp"

#include <stdexcept>

namespace feddiv {

double filtering_accuracy(const std::vector<bool>& predicted_clean, const std::vector<bool>& clean_mask) {
  if (predicted_clean.size() != clean_mask.size())
    throw std::invalid_argument("filtering_accuracy: length mismatch");
  if (clean_mask.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < clean_mask.size(); ++i) hits += predicted_clean[i] == clean_mask[i];
  return static_cast<double>(hits) / static_cast<double>(clean_mask.size());
}

std::vector<bool> clean_flags(const FilterSplit& split, std::size_t n) {
  std::vector<bool> flags(n, false);
  for (std::size_t i : split.clean) flags.at(i) = true;
  return flags;
}

double test_accuracy(const ModelParams& model, const LabeledDataset& test) {
  if (test.empty()) throw std::invalid_argument("test_accuracy: empty test set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    hits += argmax(predict_proba(model, test.features[i])) == test.true_labels[i];
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

double training_stability(const std::vector<ModelParams>& local_models, const ModelParams& global_model) {
  if (local_models.empty()) return 0.0;
  const Vector g = global_model.flatten();
  double total = 0.0;
  for (const auto& m : local_models) {
    if (!m.same_shape(global_model)) throw std::invalid_argument("training_stability: shape mismatch");
    total += (m.flatten() - g).squaredNorm();
  }
  return total / static_cast<double>(local_models.size());
}

std::vector<std::vector<std::size_t>> confusion_matrix(const ModelParams& model, const LabeledDataset& data) {
  std::vector<std::vector<std::size_t>> counts(data.num_classes, std::vector<std::size_t>(data.num_classes, 0));
  for (std::size_t i = 0; i < data.size(); ++i)
    ++counts[data.true_labels[i]][argmax(predict_proba(model, data.features[i]))];
  return counts;
}

std::optional<double> RoundRecord::mean_filtering_accuracy() const {
  double total = 0.0;
  int count = 0;
  for (const auto& c : clients)
    if (c.filtering_accuracy) {
      total += *c.filtering_accuracy;
      ++count;
    }
  if (count == 0) return std::nullopt;
  return total / count;
}

}  // namespace feddiv
