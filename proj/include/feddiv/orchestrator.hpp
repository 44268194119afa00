#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "feddiv/classifier.hpp"
#include "feddiv/config.hpp"
#include "feddiv/dataset.hpp"
#include "feddiv/metrics.hpp"
#include "feddiv/noise_filter.hpp"
#include "feddiv/partition.hpp"
#include "feddiv/pcs.hpp"
#include "feddiv/rng.hpp"

namespace feddiv {

struct ClientState {
  std::size_t id = 0;
  LabeledDataset data;
  ClientBias bias;
  double noise_estimate = 0.0;  // latest delta_hat_k
  double true_noise_level = 0.0;  // delta_k, evaluation only
  std::size_t num_samples() const { return data.size(); }
};

struct ServerState {
  ModelParams model;
  GmmParams global_filter;
  FilterBank bank;
  int round = 0;  // rounds completed, warm-up included
};

// Dataset, partition and noise realisation for one seed. Every variant run
// from the same config sees the same Federation.
struct Federation {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<Vector> centers;
  PartitionPlan plan;
  NoiseAssignment noise;
  std::vector<LabeledDataset> client_data;
};

Federation prepare_federation(const RunConfig& config);

std::vector<ClientState> make_clients(const Federation& federation);
ServerState make_server(const RunConfig& config, const std::vector<ClientState>& clients);

TrainOptions train_options(const RunConfig& config);

// round(omega * K) clamped to [1, K] drawn without replacement from the
// eligible ids (all K when `eligible` is empty), returned sorted.
std::vector<std::size_t> select_clients(int num_clients, double omega, RngStream& rng,
                                        const std::vector<std::size_t>& eligible = {});

// Sample-count weighted average. Throws when every weight is zero.
ModelParams fedavg_aggregate(const std::vector<ModelParams>& models, const std::vector<std::size_t>& weights);

// Context a round needs besides the mutable states.
struct RoundContext {
  const RunConfig& config;
  const RngStream& root;
  const LabeledDataset& test;
};

// One MixUp-only FedAvg round. Used for warm-up and for the baseline.
RoundRecord fedavg_round(ServerState& server, std::vector<ClientState>& clients, const RoundContext& ctx,
                         const char* phase);

// ceil(warmup_iterations / omega) warm-up rounds; the filter bank is untouched.
std::vector<RoundRecord> warmup(ServerState& server, std::vector<ClientState>& clients,
                                const RoundContext& ctx);

// One training round dispatched on config.algorithm_variant.
RoundRecord run_round(ServerState& server, std::vector<ClientState>& clients, const RoundContext& ctx);

struct FinalClientEval {
  std::size_t client = 0;
  double true_noise_level = 0.0;
  double realized_noise_rate = 0.0;
  double estimated_noise_level = 0.0;
  double filtering_accuracy = 0.0;
};

struct RunSummary {
  double best_test_accuracy = 0.0;
  double final_test_accuracy = 0.0;
  int best_round = 0;
  // Filtering with the final global model and filter over every non-empty
  // client; absent for the baseline, which never filters.
  std::optional<double> mean_filtering_accuracy;
  std::optional<double> mean_filtering_accuracy_noisy_clients;
  std::optional<double> mean_filtering_accuracy_clean_clients;
  std::vector<FinalClientEval> final_clients;
  double mean_training_stability_last10 = 0.0;
  std::size_t starved_epochs = 0;
  std::size_t starved_rounds = 0;
};

struct ExperimentResult {
  std::vector<RoundRecord> rounds;
  RunSummary summary;
  ServerState final_server;
};

using RoundCallback = std::function<void(const RoundRecord&)>;

ExperimentResult run_experiment(const RunConfig& config, const Federation& federation,
                                const RoundCallback& on_round = {});
ExperimentResult run_experiment(const RunConfig& config, const RoundCallback& on_round = {});

// Fraction of rows whose given label differs from the true label.
double realized_noise_rate(const LabeledDataset& data);

}  // namespace feddiv
