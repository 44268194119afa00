#include "feddiv/run_log.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace feddiv {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json envelope(const char* type) {
  ordered_json j;
  j["type"] = type;
  j["schema_version"] = kLogSchemaVersion;
  return j;
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ordered_json gmm_to_json(const GmmParams& p) {
  ordered_json j;
  j["mean"] = {p.mean[0], p.mean[1]};
  j["variance"] = {p.variance[0], p.variance[1]};
  j["weight"] = {p.weight[0], p.weight[1]};
  return j;
}

ordered_json config_entry(const RunConfig& config) {
  auto j = envelope("config");
  j["config"] = to_json(config);
  return j;
}

ordered_json partition_entry(const RunConfig& config, const Federation& fed) {
  auto j = envelope("partition");
  j["mode"] = to_string(config.partition_mode);
  j["train_size"] = fed.train.size();
  j["test_size"] = fed.test.size();
  ordered_json sizes = ordered_json::array();
  ordered_json class_counts = ordered_json::array();
  for (const auto& idx : fed.plan.client_indices) {
    sizes.push_back(idx.size());
    std::vector<std::size_t> counts(fed.train.num_classes, 0);
    for (std::size_t i : idx) ++counts[fed.train.true_labels[i]];
    class_counts.push_back(counts);
  }
  j["client_sizes"] = sizes;
  j["client_class_counts"] = class_counts;
  if (!fed.plan.indicator.empty()) {
    ordered_json indicator = ordered_json::array();
    for (const auto& row : fed.plan.indicator) {
      ordered_json r = ordered_json::array();
      for (bool b : row) r.push_back(b ? 1 : 0);
      indicator.push_back(r);
    }
    j["indicator"] = indicator;
    j["proportions"] = fed.plan.proportions;
  }
  return j;
}

ordered_json noise_entry(const Federation& fed) {
  auto j = envelope("noise");
  j["client_noise_levels"] = fed.noise.client_noise_levels;
  ordered_json counts = ordered_json::array();
  ordered_json realized = ordered_json::array();
  for (std::size_t k = 0; k < fed.client_data.size(); ++k) {
    counts.push_back(fed.noise.corrupted_indices[k].size());
    realized.push_back(realized_noise_rate(fed.client_data[k]));
  }
  j["corrupted_counts"] = counts;
  j["realized_noise_rates"] = realized;
  j["corrupted_indices"] = fed.noise.corrupted_indices;
  return j;
}

ordered_json round_entry(const RoundRecord& rec, bool include_timing) {
  auto j = envelope("round");
  j["round"] = rec.round;
  j["phase"] = rec.phase;
  j["test_accuracy"] = rec.test_accuracy;
  j["training_stability"] = rec.training_stability;
  j["mean_filtering_accuracy"] = optional_number(rec.mean_filtering_accuracy());
  j["global_filter"] = rec.global_filter ? gmm_to_json(*rec.global_filter) : ordered_json(nullptr);
  ordered_json clients = ordered_json::array();
  for (const auto& c : rec.clients) {
    ordered_json e;
    e["client"] = c.client;
    e["num_samples"] = c.num_samples;
    e["true_noise_level"] = c.true_noise_level;
    e["realized_noise_rate"] = c.realized_noise_rate;
    e["estimated_noise_level"] = c.estimated_noise_level;
    e["filtering_accuracy"] = optional_number(c.filtering_accuracy);
    e["clean"] = c.clean;
    e["noisy"] = c.noisy;
    e["relabeled"] = c.relabeled;
    e["relabeled_correct"] = c.relabeled_correct;
    e["reselected"] = c.reselected;
    e["starved_epochs"] = c.starved_epochs;
    e["starved_round"] = c.starved_round;
    e["local_filter"] = c.local_filter ? gmm_to_json(*c.local_filter) : ordered_json(nullptr);
    if (!c.confusion.empty()) e["confusion"] = c.confusion;
    clients.push_back(e);
  }
  j["clients"] = clients;
  if (include_timing) j["wall_seconds"] = rec.wall_seconds;
  return j;
}

ordered_json summary_document(const RunConfig& config, const RunSummary& s) {
  ordered_json j;
  j["variant"] = to_string(config.algorithm_variant);
  j["seed"] = config.seed;
  j["config_hash"] = hex64(config_hash(config));
  j["best_test_accuracy"] = s.best_test_accuracy;
  j["best_round"] = s.best_round;
  j["final_test_accuracy"] = s.final_test_accuracy;
  j["mean_filtering_accuracy"] = optional_number(s.mean_filtering_accuracy);
  j["mean_filtering_accuracy_noisy_clients"] = optional_number(s.mean_filtering_accuracy_noisy_clients);
  j["mean_filtering_accuracy_clean_clients"] = optional_number(s.mean_filtering_accuracy_clean_clients);
  j["mean_training_stability_last10"] = s.mean_training_stability_last10;
  j["starved_epochs"] = s.starved_epochs;
  j["starved_rounds"] = s.starved_rounds;
  ordered_json clients = ordered_json::array();
  for (const auto& c : s.final_clients) {
    ordered_json e;
    e["client"] = c.client;
    e["true_noise_level"] = c.true_noise_level;
    e["realized_noise_rate"] = c.realized_noise_rate;
    if (config.algorithm_variant != Variant::kFedAvgBaseline) {
      e["estimated_noise_level"] = c.estimated_noise_level;
      e["filtering_accuracy"] = c.filtering_accuracy;
    }
    clients.push_back(e);
  }
  j["clients"] = clients;
  return j;
}

ordered_json summary_entry(const RunConfig& config, const RunSummary& summary) {
  auto j = envelope("summary");
  const auto doc = summary_document(config, summary);
  for (const auto& [k, v] : doc.items()) j[k] = v;
  return j;
}

void RunLogWriter::write(const ordered_json& entry) {
  out_ << entry.dump() << '\n';
  out_.flush();
}

ExperimentResult run_logged(const RunConfig& config, const Federation& federation, std::ostream& log) {
  RunLogWriter writer(log);
  writer.write(config_entry(config));
  writer.write(partition_entry(config, federation));
  writer.write(noise_entry(federation));
  auto result = run_experiment(config, federation, [&](const RoundRecord& rec) {
    writer.write(round_entry(rec, config.log_timing));
  });
  writer.write(summary_entry(config, result.summary));
  return result;
}

InspectReport inspect_log(std::istream& in) {
  InspectReport report;
  report.best_test_accuracy = -1.0;
  std::string line;
  std::size_t line_no = 0;
  bool saw_config = false, saw_summary = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("type") || !j.contains("schema_version"))
      throw std::runtime_error("line " + std::to_string(line_no) + ": not a run-log entry");
    if (j["schema_version"] != kLogSchemaVersion)
      throw std::runtime_error("line " + std::to_string(line_no) + ": unsupported schema_version");
    const std::string type = j["type"].get<std::string>();
    if (type == "config") saw_config = true;
    if (type == "summary") saw_summary = true;
    if (type != "round") continue;
    try {
      InspectRow row;
      row.round = j.at("round").get<int>();
      row.phase = j.at("phase").get<std::string>();
      row.test_accuracy = j.at("test_accuracy").get<double>();
      row.training_stability = j.at("training_stability").get<double>();
      if (!j.at("mean_filtering_accuracy").is_null())
        row.mean_filtering_accuracy = j["mean_filtering_accuracy"].get<double>();
      report.best_test_accuracy = std::max(report.best_test_accuracy, row.test_accuracy);
      report.rows.push_back(std::move(row));
    } catch (const json::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (line_no == 0) throw std::runtime_error("empty log");
  if (!saw_config) throw std::runtime_error("log has no config entry");
  if (!saw_summary) throw std::runtime_error("log has no summary entry");
  return report;
}

void print_report(const InspectReport& report, std::ostream& out) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%6s  %-8s  %9s  %12s  %9s\n", "round", "phase", "test_acc", "stability",
                "filt_acc");
  out << buf;
  for (const auto& r : report.rows) {
    char filt[32] = "-";
    if (r.mean_filtering_accuracy) std::snprintf(filt, sizeof filt, "%.4f", *r.mean_filtering_accuracy);
    std::snprintf(buf, sizeof buf, "%6d  %-8s  %9.4f  %12.6f  %9s\n", r.round, r.phase.c_str(), r.test_accuracy,
                  r.training_stability, filt);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "best test accuracy: %.4f\n", report.best_test_accuracy);
  out << buf;
}

}  // namespace feddiv
