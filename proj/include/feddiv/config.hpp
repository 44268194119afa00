#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace feddiv {

enum class PartitionMode { kIid, kDirichlet };

enum class Variant { kFedDiv, kFedDivDegraded, kFedDivLocalFilter, kFedAvgBaseline };

const char* to_string(PartitionMode mode);
const char* to_string(Variant variant);
Variant variant_from_string(const std::string& name);

// Raised for a semantically invalid configuration; field() names the
// offending RunConfig entry.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RunConfig {
  // data
  std::size_t num_samples = 5000;
  double test_fraction = 0.2;
  int num_classes = 4;
  int feature_dim = 2;
  double class_separation = 6.0;
  double cluster_std = 1.0;

  // federation
  int num_clients = 20;
  double client_fraction = 0.25;
  int total_rounds = 60;
  int warmup_iterations = 2;
  PartitionMode partition_mode = PartitionMode::kIid;
  double dirichlet_p = 0.7;
  double dirichlet_alpha = 10.0;

  // label noise
  double noise_client_prob = 0.6;
  double noise_lower_bound = 0.5;

  // local training
  int local_epochs = 5;
  int batch_size = 10;
  double learning_rate = 0.003;
  double sgd_momentum = 0.5;
  double mixup_alpha = 1.0;
  double reg_weight = 0.0;
  std::vector<int> model_hidden_sizes = {32};

  // noise filter / sampler
  double relabel_threshold = 0.75;
  double debias_factor = 0.5;
  double bias_momentum = 0.2;
  double noisy_client_threshold = 0.1;
  double clean_posterior_threshold = 0.5;
  int em_max_iters = 100;
  double em_tolerance = 1e-6;
  bool normalize_losses = false;

  Variant algorithm_variant = Variant::kFedDiv;
  std::uint64_t seed = 1;

  // execution / logging
  int num_threads = 1;
  bool log_timing = false;
  std::vector<int> confusion_rounds;

  // Throws ConfigError naming the first violated field.
  void validate() const;

  int clients_per_round() const;
  int warmup_rounds() const;
};

nlohmann::ordered_json to_json(const RunConfig& config);

// Unknown keys and type mismatches raise ConfigError.
RunConfig config_from_json(const nlohmann::json& j);

// Applies `key=value`; value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Ignores num_threads and log_timing, which never change results.
std::uint64_t config_hash(const RunConfig& config);

}  // namespace feddiv
