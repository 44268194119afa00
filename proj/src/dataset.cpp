#include "feddiv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace feddiv {

void LabeledDataset::validate() const {
  const std::size_t n = features.size();
  if (given_labels.size() != n || true_labels.size() != n || clean_mask.size() != n)
    throw std::logic_error("LabeledDataset: column lengths differ");
  if (num_classes <= 0 && n > 0) throw std::logic_error("LabeledDataset: num_classes must be positive");
  for (std::size_t i = 0; i < n; ++i) {
    if (given_labels[i] < 0 || given_labels[i] >= num_classes || true_labels[i] < 0 ||
        true_labels[i] >= num_classes)
      throw std::logic_error("LabeledDataset: label out of range at row " + std::to_string(i));
    if (clean_mask[i] != (given_labels[i] == true_labels[i]))
      throw std::logic_error("LabeledDataset: clean_mask disagrees with labels at row " +
                             std::to_string(i));
  }
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.features.reserve(indices.size());
  out.given_labels.reserve(indices.size());
  out.true_labels.reserve(indices.size());
  out.clean_mask.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw std::out_of_range("LabeledDataset::subset: index out of range");
    out.features.push_back(features[i]);
    out.given_labels.push_back(given_labels[i]);
    out.true_labels.push_back(true_labels[i]);
    out.clean_mask.push_back(clean_mask[i]);
  }
  return out;
}

void LabeledDataset::push_back(const Vector& x, int given, int truth) {
  features.push_back(x);
  given_labels.push_back(given);
  true_labels.push_back(truth);
  clean_mask.push_back(given == truth);
}

BlobSample make_blobs_with_centers(std::size_t num_samples, int num_classes, int dim,
                                   double class_separation, RngStream& rng,
                                   double cluster_std) {
  if (num_classes <= 0) throw std::invalid_argument("make_blobs: num_classes must be positive");
  if (dim < 1) throw std::invalid_argument("make_blobs: dim must be >= 1");
  if (num_samples < static_cast<std::size_t>(num_classes))
    throw std::invalid_argument("make_blobs: num_samples must be >= num_classes");
  if (class_separation < 0.0) throw std::invalid_argument("make_blobs: negative class_separation");

  BlobSample out;
  out.centers.assign(num_classes, Vector::Zero(dim));
  // Rejection-sample centers uniformly in a cube whose side is sized for C
  // well-spaced points; widen the cube whenever placement keeps failing.
  double side = class_separation * std::pow(static_cast<double>(num_classes), 1.0 / dim);
  int failures = 0;
  for (int c = 0; c < num_classes;) {
    Vector candidate(dim);
    for (int j = 0; j < dim; ++j) candidate[j] = rng.uniform(-0.5 * side, 0.5 * side);
    bool ok = true;
    for (int prev = 0; prev < c && ok; ++prev)
      ok = (out.centers[prev] - candidate).norm() >= class_separation;
    if (ok) {
      out.centers[c++] = candidate;
      continue;
    }
    if (++failures % 1000 == 0) side *= 1.05;
  }

  std::vector<int> labels;
  labels.reserve(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i) labels.push_back(static_cast<int>(i % num_classes));
  rng.shuffle(labels);

  LabeledDataset& data = out.data;
  data.num_classes = num_classes;
  for (int y : labels) {
    Vector x(dim);
    for (int j = 0; j < dim; ++j) x[j] = out.centers[y][j] + cluster_std * rng.normal();
    data.push_back(x, y, y);
  }
  return out;
}

LabeledDataset make_blobs(std::size_t num_samples, int num_classes, int dim,
                          double class_separation, RngStream& rng, double cluster_std) {
  return make_blobs_with_centers(num_samples, num_classes, dim, class_separation, rng,
                                 cluster_std)
      .data;
}

std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& dataset,
                                                           double test_fraction,
                                                           RngStream& rng) {
  if (dataset.empty()) throw std::invalid_argument("train_test_split: empty dataset");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("train_test_split: test_fraction must lie in (0, 1)");
  const std::size_t n = dataset.size();
  const auto test_total = static_cast<std::size_t>(std::llround(n * test_fraction));
  if (test_total == 0 || test_total >= n)
    throw std::invalid_argument("train_test_split: test_fraction leaves an empty train or test set");

  const int num_classes = dataset.num_classes;
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < n; ++i) by_class[dataset.true_labels[i]].push_back(i);

  // Largest-remainder apportionment of test_total across classes.
  std::vector<std::size_t> quota(num_classes);
  std::vector<std::pair<double, int>> remainders;
  std::size_t assigned = 0;
  for (int c = 0; c < num_classes; ++c) {
    const double ideal = static_cast<double>(by_class[c].size()) * test_total / n;
    quota[c] = static_cast<std::size_t>(std::floor(ideal));
    assigned += quota[c];
    remainders.emplace_back(ideal - std::floor(ideal), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < test_total; ++r) {
    ++quota[remainders[r % remainders.size()].second];
    ++assigned;
  }

  std::vector<bool> is_test(n, false);
  for (int c = 0; c < num_classes; ++c) {
    auto idx = by_class[c];
    rng.shuffle(idx);
    for (std::size_t j = 0; j < quota[c] && j < idx.size(); ++j) is_test[idx[j]] = true;
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < n; ++i) (is_test[i] ? test_idx : train_idx).push_back(i);
  return {dataset.subset(train_idx), dataset.subset(test_idx)};
}

int nearest_center(const std::vector<Vector>& centers, const Vector& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = (centers[c] - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace feddiv
