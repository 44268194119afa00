#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <utility>
#include <vector>

#include "feddiv/rng.hpp"

namespace feddiv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Feature vectors with the labels a client sees (given_labels) next to the
// ground truth. true_labels and clean_mask exist for evaluation only; the
// training path never reads them.
struct LabeledDataset {
  std::vector<Vector> features;
  std::vector<int> given_labels;
  std::vector<int> true_labels;
  std::vector<bool> clean_mask;
  int num_classes = 0;

  std::size_t size() const { return features.size(); }
  bool empty() const { return features.empty(); }
  std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }

  // Throws std::logic_error when any invariant is broken.
  void validate() const;

  // Rows at `indices`, in that order.
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;

  void push_back(const Vector& x, int given, int truth);
};

struct BlobSample {
  LabeledDataset data;
  std::vector<Vector> centers;
};

// Isotropic Gaussian clusters, one per class. Centers are drawn uniformly
// in a cube of side sep * C^(1/d) and kept only if every pair is at least
// `class_separation` apart.
BlobSample make_blobs_with_centers(std::size_t num_samples, int num_classes, int dim,
                                   double class_separation, RngStream& rng,
                                   double cluster_std = 1.0);

LabeledDataset make_blobs(std::size_t num_samples, int num_classes, int dim,
                          double class_separation, RngStream& rng,
                          double cluster_std = 1.0);

// Stratified by true label. Returns (train, test).
std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& dataset,
                                                           double test_fraction,
                                                           RngStream& rng);

// Index of the nearest center (lowest index on ties).
int nearest_center(const std::vector<Vector>& centers, const Vector& x);

}  // namespace feddiv
