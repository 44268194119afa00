#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "feddiv/config.hpp"
#include "feddiv/metrics.hpp"
#include "feddiv/orchestrator.hpp"
#include "json.hpp"

namespace feddiv {

inline constexpr int kLogSchemaVersion = 1;

nlohmann::ordered_json gmm_to_json(const GmmParams& p);
nlohmann::ordered_json config_entry(const RunConfig& config);
nlohmann::ordered_json partition_entry(const RunConfig& config, const Federation& federation);
nlohmann::ordered_json noise_entry(const Federation& federation);
nlohmann::ordered_json round_entry(const RoundRecord& record, bool include_timing);
nlohmann::ordered_json summary_entry(const RunConfig& config, const RunSummary& summary);

// summary.json: the final-summary payload without the log envelope.
nlohmann::ordered_json summary_document(const RunConfig& config, const RunSummary& summary);

// Writes one JSON object per line (LF endings) as entries arrive.
class RunLogWriter {
 public:
  explicit RunLogWriter(std::ostream& out) : out_(out) {}
  void write(const nlohmann::ordered_json& entry);

 private:
  std::ostream& out_;
};

// Runs the experiment, streaming the full log to `log`. Returns the result
// so callers can write summaries.
ExperimentResult run_logged(const RunConfig& config, const Federation& federation, std::ostream& log);

struct InspectRow {
  int round = 0;
  std::string phase;
  double test_accuracy = 0.0;
  double training_stability = 0.0;
  std::optional<double> mean_filtering_accuracy;
};

struct InspectReport {
  std::vector<InspectRow> rows;
  double best_test_accuracy = 0.0;
};

// Throws std::runtime_error on an empty or malformed log.
InspectReport inspect_log(std::istream& in);
void print_report(const InspectReport& report, std::ostream& out);

std::string hex64(std::uint64_t v);

}  // namespace feddiv
