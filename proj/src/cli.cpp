#include "feddiv/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "feddiv/orchestrator.hpp"
#include "feddiv/run_log.hpp"

namespace feddiv::cli {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path.string() + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("config file '" + path.string() + "' is not valid JSON");
  for (const auto& o : overrides) apply_override(j, o);
  RunConfig config = config_from_json(j);
  config.validate();
  return config;
}

namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "invalid config: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kParseError;
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
}

ExperimentResult run_into(const RunConfig& config, const Federation& federation, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream log(dir / "run.jsonl", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write '" + (dir / "run.jsonl").string() + "'");
  auto result = run_logged(config, federation, log);
  write_file(dir / "summary.json", summary_document(config, result.summary).dump(2) + "\n");
  return result;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

int run(const fs::path& config_path, const fs::path& out_dir, const std::vector<std::string>& overrides,
        std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = load_config(config_path, overrides);
    const auto result = run_into(config, prepare_federation(config), out_dir);
    out << "variant " << to_string(config.algorithm_variant) << ": best test accuracy "
        << fmt(result.summary.best_test_accuracy) << ", final " << fmt(result.summary.final_test_accuracy)
        << '\n';
    return kOk;
  });
}

int compare(const fs::path& config_path, const fs::path& out_dir, const std::vector<std::string>& overrides,
            std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig base = load_config(config_path, overrides);
    const Federation federation = prepare_federation(base);
    std::ostringstream csv;
    csv << kCompareHeader << '\n';
    for (Variant v : {Variant::kFedDiv, Variant::kFedAvgBaseline, Variant::kFedDivDegraded,
                      Variant::kFedDivLocalFilter}) {
      RunConfig config = base;
      config.algorithm_variant = v;
      const auto result = run_into(config, federation, out_dir / to_string(v));
      const auto& s = result.summary;
      csv << to_string(v) << ',' << fmt(s.best_test_accuracy) << ',' << fmt(s.final_test_accuracy) << ','
          << (s.mean_filtering_accuracy ? fmt(*s.mean_filtering_accuracy) : std::string("nan")) << '\n';
    }
    write_file(out_dir / "compare.csv", csv.str());
    out << csv.str();
    return kOk;
  });
}

int inspect(const fs::path& log_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::ifstream in(log_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open log '" + log_path.string() + "'");
    print_report(inspect_log(in), out);
    return kOk;
  });
}

}  // namespace feddiv::cli
