#include "feddiv/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace feddiv {

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const LabeledDataset& dataset) {
  std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.true_labels[i]].push_back(i);
  return by_class;
}

}  // namespace

std::vector<std::size_t> largest_remainder(const std::vector<double>& weights,
                                           std::size_t total) {
  std::vector<std::size_t> counts(weights.size(), 0);
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double ideal = weights[i] * static_cast<double>(total);
    const double fl = std::floor(ideal);
    counts[i] = static_cast<std::size_t>(fl);
    assigned += counts[i];
    rem.emplace_back(ideal - fl, i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  // Floating error can leave assigned above total by a unit in pathological inputs.
  while (assigned > total) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  for (std::size_t r = 0; assigned < total && !rem.empty(); ++r) {
    ++counts[rem[r % rem.size()].second];
    ++assigned;
  }
  return counts;
}

PartitionPlan partition_iid(const LabeledDataset& dataset, int num_clients, RngStream& rng) {
  if (num_clients < 1) throw std::invalid_argument("partition_iid: K must be >= 1");
  auto by_class = indices_by_class(dataset);
  for (int c = 0; c < dataset.num_classes; ++c)
    if (by_class[c].size() < static_cast<std::size_t>(num_clients))
      throw std::invalid_argument("partition_iid: class " + std::to_string(c) + " has " +
                                  std::to_string(by_class[c].size()) +
                                  " samples, fewer than K=" + std::to_string(num_clients));

  PartitionPlan plan;
  plan.client_indices.resize(num_clients);
  std::size_t cursor = 0;
  for (auto& idx : by_class) {
    rng.shuffle(idx);
    const std::size_t per = idx.size() / num_clients;
    std::size_t pos = 0;
    for (int k = 0; k < num_clients; ++k)
      for (std::size_t j = 0; j < per; ++j) plan.client_indices[k].push_back(idx[pos++]);
    for (; pos < idx.size(); ++pos) {
      plan.client_indices[cursor].push_back(idx[pos]);
      cursor = (cursor + 1) % num_clients;
    }
  }
  for (auto& list : plan.client_indices) std::sort(list.begin(), list.end());
  return plan;
}

PartitionPlan partition_dirichlet(const LabeledDataset& dataset, int num_clients, double p,
                                  double alpha_dir, RngStream& rng) {
  if (num_clients < 1) throw std::invalid_argument("partition_dirichlet: K must be >= 1");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("partition_dirichlet: p must lie in (0, 1]");
  if (!(alpha_dir > 0.0)) throw std::invalid_argument("partition_dirichlet: alpha_dir must be > 0");
  constexpr int kMaxRedraws = 1000;

  const int num_classes = dataset.num_classes;
  PartitionPlan plan;
  plan.client_indices.resize(num_clients);
  plan.indicator.assign(num_classes, std::vector<bool>(num_clients, false));
  plan.proportions.resize(num_classes);

  for (int c = 0; c < num_classes; ++c) {
    auto& row = plan.indicator[c];
    int draws = 0;
    for (;;) {
      for (int k = 0; k < num_clients; ++k) row[k] = rng.bernoulli(p);
      if (std::any_of(row.begin(), row.end(), [](bool b) { return b; })) break;
      if (++draws >= kMaxRedraws)
        throw std::runtime_error("partition_dirichlet: indicator row for class " +
                                 std::to_string(c) + " stayed empty after 1000 redraws");
    }
  }

  auto by_class = indices_by_class(dataset);
  for (int c = 0; c < num_classes; ++c) {
    std::vector<int> owners;
    for (int k = 0; k < num_clients; ++k)
      if (plan.indicator[c][k]) owners.push_back(k);
    plan.proportions[c] = rng.dirichlet(alpha_dir, owners.size());
    auto idx = by_class[c];
    rng.shuffle(idx);
    const auto counts = largest_remainder(plan.proportions[c], idx.size());
    std::size_t pos = 0;
    for (std::size_t o = 0; o < owners.size(); ++o)
      for (std::size_t j = 0; j < counts[o]; ++j) plan.client_indices[owners[o]].push_back(idx[pos++]);
  }
  for (auto& list : plan.client_indices) std::sort(list.begin(), list.end());
  return plan;
}

NoisyClients inject_noise(const PartitionPlan& plan, const LabeledDataset& dataset, double rho,
                          double tau, const RngStream& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("inject_noise: rho must lie in [0, 1]");
  if (!(tau >= 0.0 && tau < 1.0)) throw std::invalid_argument("inject_noise: tau must lie in [0, 1)");
  const std::size_t K = plan.num_clients();
  NoisyClients out;
  out.clients.reserve(K);
  out.noise.client_noise_levels.assign(K, 0.0);
  out.noise.corrupted_indices.assign(K, {});

  for (std::size_t k = 0; k < K; ++k) {
    RngStream stream = rng.fork(Purpose::kNoise, 0, k);
    LabeledDataset local = dataset.subset(plan.client_indices[k]);
    double delta = 0.0;
    if (stream.uniform() < rho) delta = stream.uniform(tau, 1.0);
    out.noise.client_noise_levels[k] = delta;

    const std::size_t n = local.size();
    const auto count = static_cast<std::size_t>(std::llround(delta * static_cast<double>(n)));
    std::vector<std::size_t> positions(n);
    std::iota(positions.begin(), positions.end(), 0);
    // Partial Fisher-Yates: the first `count` entries are a uniform sample.
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + stream.index(n - i);
      std::swap(positions[i], positions[j]);
    }
    positions.resize(count);
    std::sort(positions.begin(), positions.end());
    for (std::size_t pos : positions) {
      local.given_labels[pos] = static_cast<int>(stream.index(local.num_classes));
      local.clean_mask[pos] = local.given_labels[pos] == local.true_labels[pos];
    }
    out.noise.corrupted_indices[k] = std::move(positions);
    out.clients.push_back(std::move(local));
  }
  return out;
}

}  // namespace feddiv
