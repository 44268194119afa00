#include "feddiv/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace feddiv {

using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(PartitionMode mode) {
  return mode == PartitionMode::kIid ? "iid" : "dirichlet";
}

const char* to_string(Variant variant) {
  switch (variant) {
    case Variant::kFedDiv: return "feddiv";
    case Variant::kFedDivDegraded: return "feddiv_degraded";
    case Variant::kFedDivLocalFilter: return "feddiv_local_filter";
    case Variant::kFedAvgBaseline: return "fedavg_baseline";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  for (Variant v : {Variant::kFedDiv, Variant::kFedDivDegraded, Variant::kFedDivLocalFilter,
                    Variant::kFedAvgBaseline})
    if (name == to_string(v)) return v;
  throw ConfigError("algorithm_variant", "unknown variant '" + name + "'");
}

int RunConfig::clients_per_round() const {
  const long m = std::lround(client_fraction * num_clients);
  return static_cast<int>(std::clamp<long>(m, 1, num_clients));
}

int RunConfig::warmup_rounds() const {
  if (warmup_iterations <= 0) return 0;
  // 5 / 0.1 lands a hair above 50 in binary; don't let that become 51.
  return static_cast<int>(std::ceil(warmup_iterations / client_fraction - 1e-9));
}

void RunConfig::validate() const {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(field, what);
  };
  require(num_classes >= 2, "num_classes", "must be >= 2");
  require(feature_dim >= 1, "feature_dim", "must be >= 1");
  require(num_samples >= static_cast<std::size_t>(num_classes), "num_samples",
          "must be >= num_classes");
  require(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction", "must lie in (0, 1)");
  require(class_separation >= 0.0, "class_separation", "must be >= 0");
  require(cluster_std > 0.0, "cluster_std", "must be > 0");
  require(num_clients >= 1, "num_clients", "must be >= 1");
  require(client_fraction > 0.0 && client_fraction <= 1.0, "client_fraction",
          "must lie in (0, 1]");
  require(client_fraction * num_clients >= 1.0 - 1e-12, "client_fraction",
          "client_fraction * num_clients must be >= 1");
  require(total_rounds >= 0, "total_rounds", "must be >= 0");
  require(warmup_iterations >= 0, "warmup_iterations", "must be >= 0");
  require(dirichlet_p > 0.0 && dirichlet_p <= 1.0, "dirichlet_p", "must lie in (0, 1]");
  require(dirichlet_alpha > 0.0, "dirichlet_alpha", "must be > 0");
  require(noise_client_prob >= 0.0 && noise_client_prob <= 1.0, "noise_client_prob",
          "must lie in [0, 1]");
  require(noise_lower_bound >= 0.0 && noise_lower_bound < 1.0, "noise_lower_bound",
          "must lie in [0, 1)");
  require(local_epochs >= 0, "local_epochs", "must be >= 0");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate",
          "must be a finite positive number");
  require(sgd_momentum >= 0.0 && sgd_momentum < 1.0, "sgd_momentum", "must lie in [0, 1)");
  require(mixup_alpha > 0.0, "mixup_alpha", "must be > 0");
  require(reg_weight >= 0.0, "reg_weight", "must be >= 0");
  for (int h : model_hidden_sizes) require(h >= 1, "model_hidden_sizes", "entries must be >= 1");
  require(relabel_threshold >= 0.0 && relabel_threshold <= 1.0, "relabel_threshold",
          "must lie in [0, 1]");
  require(bias_momentum >= 0.0 && bias_momentum <= 1.0, "bias_momentum", "must lie in [0, 1]");
  require(noisy_client_threshold >= 0.0 && noisy_client_threshold <= 1.0,
          "noisy_client_threshold", "must lie in [0, 1]");
  require(clean_posterior_threshold >= 0.0 && clean_posterior_threshold <= 1.0,
          "clean_posterior_threshold", "must lie in [0, 1]");
  require(em_max_iters >= 1, "em_max_iters", "must be >= 1");
  require(em_tolerance > 0.0, "em_tolerance", "must be > 0");
  require(num_threads >= 1, "num_threads", "must be >= 1");
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["num_samples"] = c.num_samples;
  j["test_fraction"] = c.test_fraction;
  j["num_classes"] = c.num_classes;
  j["feature_dim"] = c.feature_dim;
  j["class_separation"] = c.class_separation;
  j["cluster_std"] = c.cluster_std;
  j["num_clients"] = c.num_clients;
  j["client_fraction"] = c.client_fraction;
  j["total_rounds"] = c.total_rounds;
  j["warmup_iterations"] = c.warmup_iterations;
  j["partition_mode"] = to_string(c.partition_mode);
  j["dirichlet_p"] = c.dirichlet_p;
  j["dirichlet_alpha"] = c.dirichlet_alpha;
  j["noise_client_prob"] = c.noise_client_prob;
  j["noise_lower_bound"] = c.noise_lower_bound;
  j["local_epochs"] = c.local_epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["sgd_momentum"] = c.sgd_momentum;
  j["mixup_alpha"] = c.mixup_alpha;
  j["reg_weight"] = c.reg_weight;
  j["model_hidden_sizes"] = c.model_hidden_sizes;
  j["relabel_threshold"] = c.relabel_threshold;
  j["debias_factor"] = c.debias_factor;
  j["bias_momentum"] = c.bias_momentum;
  j["noisy_client_threshold"] = c.noisy_client_threshold;
  j["clean_posterior_threshold"] = c.clean_posterior_threshold;
  j["em_max_iters"] = c.em_max_iters;
  j["em_tolerance"] = c.em_tolerance;
  j["normalize_losses"] = c.normalize_losses;
  j["algorithm_variant"] = to_string(c.algorithm_variant);
  j["seed"] = c.seed;
  j["num_threads"] = c.num_threads;
  j["log_timing"] = c.log_timing;
  j["confusion_rounds"] = c.confusion_rounds;
  return j;
}

namespace {

template <typename T>
void read_field(const json& j, const std::string& key, T& out) {
  try {
    out = j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "has the wrong type");
  }
}

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  RunConfig c;
  std::map<std::string, std::function<void(const json&)>> setters = {
      {"num_samples", [&](const json& v) { read_field(v, "num_samples", c.num_samples); }},
      {"test_fraction", [&](const json& v) { read_field(v, "test_fraction", c.test_fraction); }},
      {"num_classes", [&](const json& v) { read_field(v, "num_classes", c.num_classes); }},
      {"feature_dim", [&](const json& v) { read_field(v, "feature_dim", c.feature_dim); }},
      {"class_separation",
       [&](const json& v) { read_field(v, "class_separation", c.class_separation); }},
      {"cluster_std", [&](const json& v) { read_field(v, "cluster_std", c.cluster_std); }},
      {"num_clients", [&](const json& v) { read_field(v, "num_clients", c.num_clients); }},
      {"client_fraction",
       [&](const json& v) { read_field(v, "client_fraction", c.client_fraction); }},
      {"total_rounds", [&](const json& v) { read_field(v, "total_rounds", c.total_rounds); }},
      {"warmup_iterations",
       [&](const json& v) { read_field(v, "warmup_iterations", c.warmup_iterations); }},
      {"partition_mode",
       [&](const json& v) {
         std::string s;
         read_field(v, "partition_mode", s);
         if (s == "iid") c.partition_mode = PartitionMode::kIid;
         else if (s == "dirichlet") c.partition_mode = PartitionMode::kDirichlet;
         else throw ConfigError("partition_mode", "must be 'iid' or 'dirichlet'");
       }},
      {"dirichlet_p", [&](const json& v) { read_field(v, "dirichlet_p", c.dirichlet_p); }},
      {"dirichlet_alpha",
       [&](const json& v) { read_field(v, "dirichlet_alpha", c.dirichlet_alpha); }},
      {"noise_client_prob",
       [&](const json& v) { read_field(v, "noise_client_prob", c.noise_client_prob); }},
      {"noise_lower_bound",
       [&](const json& v) { read_field(v, "noise_lower_bound", c.noise_lower_bound); }},
      {"local_epochs", [&](const json& v) { read_field(v, "local_epochs", c.local_epochs); }},
      {"batch_size", [&](const json& v) { read_field(v, "batch_size", c.batch_size); }},
      {"learning_rate", [&](const json& v) { read_field(v, "learning_rate", c.learning_rate); }},
      {"sgd_momentum", [&](const json& v) { read_field(v, "sgd_momentum", c.sgd_momentum); }},
      {"mixup_alpha", [&](const json& v) { read_field(v, "mixup_alpha", c.mixup_alpha); }},
      {"reg_weight", [&](const json& v) { read_field(v, "reg_weight", c.reg_weight); }},
      {"model_hidden_sizes",
       [&](const json& v) { read_field(v, "model_hidden_sizes", c.model_hidden_sizes); }},
      {"relabel_threshold",
       [&](const json& v) { read_field(v, "relabel_threshold", c.relabel_threshold); }},
      {"debias_factor", [&](const json& v) { read_field(v, "debias_factor", c.debias_factor); }},
      {"bias_momentum", [&](const json& v) { read_field(v, "bias_momentum", c.bias_momentum); }},
      {"noisy_client_threshold",
       [&](const json& v) {
         read_field(v, "noisy_client_threshold", c.noisy_client_threshold);
       }},
      {"clean_posterior_threshold",
       [&](const json& v) {
         read_field(v, "clean_posterior_threshold", c.clean_posterior_threshold);
       }},
      {"em_max_iters", [&](const json& v) { read_field(v, "em_max_iters", c.em_max_iters); }},
      {"em_tolerance", [&](const json& v) { read_field(v, "em_tolerance", c.em_tolerance); }},
      {"normalize_losses",
       [&](const json& v) { read_field(v, "normalize_losses", c.normalize_losses); }},
      {"algorithm_variant",
       [&](const json& v) {
         std::string s;
         read_field(v, "algorithm_variant", s);
         c.algorithm_variant = variant_from_string(s);
       }},
      {"seed",
       [&](const json& v) {
         if (!v.is_number_integer()) throw ConfigError("seed", "must be an integer");
         c.seed = v.is_number_unsigned() ? v.get<std::uint64_t>()
                                         : static_cast<std::uint64_t>(v.get<std::int64_t>());
       }},
      {"num_threads", [&](const json& v) { read_field(v, "num_threads", c.num_threads); }},
      {"log_timing", [&](const json& v) { read_field(v, "log_timing", c.log_timing); }},
      {"confusion_rounds",
       [&](const json& v) { read_field(v, "confusion_rounds", c.confusion_rounds); }},
  };
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown config field");
    it->second(value);
  }
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(assignment, "override must have the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;
  j[key] = value;
}

std::uint64_t config_hash(const RunConfig& config) {
  // FNV-1a over the canonical echo, minus fields that cannot change results.
  auto j = to_json(config);
  j.erase("num_threads");
  j.erase("log_timing");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace feddiv
