#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "feddiv/dataset.hpp"
#include "feddiv/rng.hpp"

namespace feddiv {

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

// Feed-forward classifier: tanh on every hidden layer, linear output logits.
struct ModelParams {
  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
  int num_classes() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }
  std::size_t num_parameters() const;

  // Flattened as [W_0 (column-major), b_0, W_1, b_1, ...].
  Vector flatten() const;
  void assign_flat(const Vector& flat);

  bool same_shape(const ModelParams& other) const;
  bool all_finite() const;

  static ModelParams zeros_like(const ModelParams& shape);
};

// Glorot-uniform weights, zero biases.
ModelParams init_params(int input_dim, const std::vector<int>& hidden_sizes, int num_classes,
                        RngStream& rng);

Vector forward_logits(const ModelParams& params, const Vector& x);
Vector softmax(const Vector& logits);
Vector log_softmax(const Vector& logits);
Vector predict_proba(const ModelParams& params, const Vector& x);
double cross_entropy(const ModelParams& params, const Vector& x, int y);

// argmax with lowest-index tie-breaking.
int argmax(const Vector& v);

struct MixedSample {
  Vector x;
  Vector y;  // probability vector over classes
};

MixedSample mixup_pair(const Vector& xi, int yi, const Vector& xj, int yj, double lambda,
                       int num_classes);

struct LossAndGrad {
  double loss = 0.0;
  ModelParams grad;
};

// Sum over the batch of soft-target cross-entropy, plus
// eta * KL(uniform || batch-mean prediction).
LossAndGrad batch_loss(const ModelParams& params, const std::vector<MixedSample>& batch,
                       double eta);

struct TrainingPair {
  Vector x;
  int y = 0;
};

struct TrainOptions {
  int epochs = 1;
  int batch_size = 10;
  double learning_rate = 0.01;
  double momentum = 0.5;
  double mixup_alpha = 1.0;
  double reg_weight = 0.0;
};

// SGD with momentum whose velocity persists across epochs, so a caller can
// change the training set between epochs without resetting the optimizer.
class LocalTrainer {
 public:
  LocalTrainer(ModelParams params, const TrainOptions& options);

  // One pass over `data`: shuffle, batch, MixUp within each batch against a
  // shuffled copy of itself with lambda ~ Beta(alpha, alpha). Returns the
  // summed epoch loss.
  double train_epoch(const std::vector<TrainingPair>& data, RngStream& rng);

  const ModelParams& params() const { return params_; }
  ModelParams release() && { return std::move(params_); }

 private:
  ModelParams params_;
  ModelParams velocity_;
  TrainOptions options_;
};

ModelParams local_train(const ModelParams& params, const std::vector<TrainingPair>& data,
                        const TrainOptions& options, RngStream& rng);

std::vector<TrainingPair> training_pairs(const LabeledDataset& data);

std::vector<double> per_sample_losses(const ModelParams& params, const LabeledDataset& data);

}  // namespace feddiv
