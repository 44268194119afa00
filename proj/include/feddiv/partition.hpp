#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "feddiv/dataset.hpp"
#include "feddiv/rng.hpp"

namespace feddiv {

struct PartitionPlan {
  std::vector<std::vector<std::size_t>> client_indices;  // into the source dataset
  // Non-IID only: indicator[c][k] and, per class, proportions over the
  // clients with indicator[c][k] set (in increasing k).
  std::vector<std::vector<bool>> indicator;
  std::vector<std::vector<double>> proportions;

  std::size_t num_clients() const { return client_indices.size(); }
};

struct NoiseAssignment {
  std::vector<double> client_noise_levels;                 // delta_k
  std::vector<std::vector<std::size_t>> corrupted_indices;  // positions within each client
};

struct NoisyClients {
  std::vector<LabeledDataset> clients;
  NoiseAssignment noise;
};

// Per class, every client receives floor(n_c / K) samples; the remainders
// go round-robin with a pointer carried across classes.
PartitionPlan partition_iid(const LabeledDataset& dataset, int num_clients, RngStream& rng);

PartitionPlan partition_dirichlet(const LabeledDataset& dataset, int num_clients, double p,
                                  double alpha_dir, RngStream& rng);

// With probability rho a client gets delta_k ~ U(tau, 1), else 0; then
// round(delta_k * n_k) of its samples get a label drawn uniformly from all
// classes (the true class included).
NoisyClients inject_noise(const PartitionPlan& plan, const LabeledDataset& dataset, double rho,
                          double tau, const RngStream& rng);

// Largest-remainder rounding of `weights * total` (weights sum to 1).
std::vector<std::size_t> largest_remainder(const std::vector<double>& weights, std::size_t total);

}  // namespace feddiv
