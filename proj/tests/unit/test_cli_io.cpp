#include "doctest.h"
#include "feddiv/cli.hpp"
#include "feddiv/config.hpp"
#include "feddiv/run_log.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace feddiv;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("feddiv_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_config(const fs::path& dir, const json& j) {
  fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

json minimal_config() {
  return {{"num_samples", 400},   {"num_clients", 4},       {"client_fraction", 0.5},
          {"total_rounds", 3},    {"warmup_iterations", 1}, {"local_epochs", 1},
          {"model_hidden_sizes", {8}}};
}

std::vector<json> read_lines(const fs::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("missing config file exits 1 and names the path") {
  auto dir = scratch_dir("missing");
  std::ostringstream out, err;
  const auto path = dir / "nope.json";
  CHECK(cli::run(path, dir / "out", {}, out, err) == cli::kParseError);
  CHECK(err.str().find(path.string()) != std::string::npos);
}

TEST_CASE("malformed config exits 1") {
  auto dir = scratch_dir("malformed");
  std::ofstream(dir / "bad.json") << "{ \"seed\": ";
  std::ostringstream out, err;
  CHECK(cli::run(dir / "bad.json", dir / "out", {}, out, err) == cli::kParseError);
}

TEST_CASE("invalid client_fraction exits 2 and names the field") {
  auto dir = scratch_dir("omega");
  auto j = minimal_config();
  j["client_fraction"] = 0.0;
  std::ostringstream out, err;
  CHECK(cli::run(write_config(dir, j), dir / "out", {}, out, err) == cli::kInvalidConfig);
  CHECK(err.str().find("client_fraction") != std::string::npos);
}

TEST_CASE("unknown field and bad override exit 2") {
  auto dir = scratch_dir("unknown");
  auto j = minimal_config();
  j["learning_rat"] = 0.1;
  std::ostringstream out, err;
  CHECK(cli::run(write_config(dir, j), dir / "out", {}, out, err) == cli::kInvalidConfig);
  CHECK(err.str().find("learning_rat") != std::string::npos);
  std::ostringstream out2, err2;
  CHECK(cli::run(write_config(dir, minimal_config()), dir / "out", {"batch_size=0"}, out2, err2) ==
        cli::kInvalidConfig);
  CHECK(err2.str().find("batch_size") != std::string::npos);
}

TEST_CASE("run log record counts and schema") {
  auto dir = scratch_dir("counts");
  std::ostringstream out, err;
  REQUIRE(cli::run(write_config(dir, minimal_config()), dir / "out", {}, out, err) == cli::kOk);
  auto lines = read_lines(dir / "out" / "run.jsonl");
  const RunConfig cfg = config_from_json(minimal_config());
  const std::size_t rounds = 1 + cfg.warmup_rounds() + 3;
  REQUIRE(lines.size() == 3 + rounds + 1);
  CHECK(lines.front()["type"] == "config");
  CHECK(lines[1]["type"] == "partition");
  CHECK(lines[2]["type"] == "noise");
  for (std::size_t i = 3; i < 3 + rounds; ++i) CHECK(lines[i]["type"] == "round");
  CHECK(lines.back()["type"] == "summary");
  for (const auto& l : lines) CHECK(l["schema_version"] == kLogSchemaVersion);
  const std::string text = slurp(dir / "out" / "run.jsonl");
  CHECK(text.find('\r') == std::string::npos);
  auto summary = json::parse(slurp(dir / "out" / "summary.json"));
  for (const char* key : {"best_test_accuracy", "final_test_accuracy", "mean_filtering_accuracy", "seed",
                          "config_hash", "clients"})
    CHECK(summary.contains(key));
  CHECK(summary["clients"][0].contains("realized_noise_rate"));
}

TEST_CASE("overrides are echoed into the log") {
  auto dir = scratch_dir("override");
  std::ostringstream out, err;
  REQUIRE(cli::run(write_config(dir, minimal_config()), dir / "out", {"seed=7", "algorithm_variant=feddiv_degraded"},
                   out, err) == cli::kOk);
  auto lines = read_lines(dir / "out" / "run.jsonl");
  CHECK(lines.front()["config"]["seed"] == 7);
  CHECK(lines.front()["config"]["algorithm_variant"] == "feddiv_degraded");
}

TEST_CASE("identical runs give byte-identical logs, threaded too") {
  auto dir = scratch_dir("determinism");
  auto cfg = write_config(dir, minimal_config());
  std::ostringstream out, err;
  REQUIRE(cli::run(cfg, dir / "a", {}, out, err) == cli::kOk);
  REQUIRE(cli::run(cfg, dir / "b", {}, out, err) == cli::kOk);
  CHECK(slurp(dir / "a" / "run.jsonl") == slurp(dir / "b" / "run.jsonl"));
  REQUIRE(cli::run(cfg, dir / "c", {"num_threads=3"}, out, err) == cli::kOk);
  REQUIRE(cli::run(cfg, dir / "d", {"num_threads=3"}, out, err) == cli::kOk);
  CHECK(slurp(dir / "c" / "run.jsonl") == slurp(dir / "d" / "run.jsonl"));
  CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "c" / "summary.json"));
}

TEST_CASE("config echo round-trips to an identical log") {
  auto dir = scratch_dir("roundtrip");
  std::ostringstream out, err;
  REQUIRE(cli::run(write_config(dir, minimal_config()), dir / "a", {"seed=11"}, out, err) == cli::kOk);
  auto echo = read_lines(dir / "a" / "run.jsonl").front()["config"];
  fs::path again = dir / "echo.json";
  std::ofstream(again) << echo.dump();
  REQUIRE(cli::run(again, dir / "b", {}, out, err) == cli::kOk);
  CHECK(slurp(dir / "a" / "run.jsonl") == slurp(dir / "b" / "run.jsonl"));
}

TEST_CASE("compare writes the fixed CSV header and four variants") {
  auto dir = scratch_dir("compare");
  std::ostringstream out, err;
  REQUIRE(cli::compare(write_config(dir, minimal_config()), dir / "out", {}, out, err) == cli::kOk);
  std::istringstream csv(slurp(dir / "out" / "compare.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "variant,best_acc,final_acc,mean_filtering_acc");
  std::vector<std::string> variants;
  while (std::getline(csv, line)) variants.push_back(line.substr(0, line.find(',')));
  CHECK(variants == std::vector<std::string>{"feddiv", "fedavg_baseline", "feddiv_degraded", "feddiv_local_filter"});
  for (const auto& v : variants) {
    CHECK(fs::exists(dir / "out" / v / "run.jsonl"));
    CHECK(fs::exists(dir / "out" / v / "summary.json"));
  }
  // Every variant sees the same partition and noise.
  auto a = read_lines(dir / "out" / "feddiv" / "run.jsonl");
  auto b = read_lines(dir / "out" / "fedavg_baseline" / "run.jsonl");
  CHECK(a[1] == b[1]);
  CHECK(a[2] == b[2]);
}

TEST_CASE("compare on clean data with an all-clean filter ties feddiv and fedavg") {
  auto dir = scratch_dir("compare_clean");
  std::ostringstream out, err;
  REQUIRE(cli::compare(write_config(dir, minimal_config()), dir / "out",
                       {"noise_client_prob=0", "clean_posterior_threshold=0"}, out, err) == cli::kOk);
  auto a = json::parse(slurp(dir / "out" / "feddiv" / "summary.json"));
  auto b = json::parse(slurp(dir / "out" / "fedavg_baseline" / "summary.json"));
  CHECK(a["best_test_accuracy"] == b["best_test_accuracy"]);
}

TEST_CASE("inspect") {
  auto dir = scratch_dir("inspect");
  std::ofstream(dir / "empty.jsonl").close();
  std::ostringstream out, err;
  CHECK(cli::inspect(dir / "empty.jsonl", out, err) == cli::kParseError);
  std::ofstream(dir / "garbage.jsonl") << "not json\n";
  CHECK(cli::inspect(dir / "garbage.jsonl", out, err) == cli::kParseError);
  CHECK(cli::inspect(dir / "absent.jsonl", out, err) == cli::kParseError);

  auto j = minimal_config();
  j["warmup_iterations"] = 0;
  j["total_rounds"] = 2;
  REQUIRE(cli::run(write_config(dir, j), dir / "out", {}, out, err) == cli::kOk);
  std::ifstream log(dir / "out" / "run.jsonl");
  auto report = inspect_log(log);
  CHECK(report.rows.size() == 3);
  auto summary = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(report.best_test_accuracy == summary["best_test_accuracy"].get<double>());

  std::ostringstream table;
  REQUIRE(cli::inspect(dir / "out" / "run.jsonl", table, err) == cli::kOk);
  std::istringstream rows(table.str());
  std::string line;
  int count = 0;
  while (std::getline(rows, line)) ++count;
  CHECK(count == 1 + 3 + 1);
}

TEST_CASE("command-line binary exit codes") {
  const char* bin = std::getenv("FEDDIV_CLI");
  if (!bin) {
    MESSAGE("FEDDIV_CLI not set; skipping binary checks");
    return;
  }
  auto dir = scratch_dir("binary");
  auto sh = [&](const std::string& args) {
    const std::string cmd = std::string("\"") + bin + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  CHECK(sh("run " + (dir / "missing.json").string() + " --out " + (dir / "o").string()) == 1);
  auto j = minimal_config();
  j["client_fraction"] = 0;
  CHECK(sh("run " + write_config(dir, j).string() + " --out " + (dir / "o").string()) == 2);
  CHECK(sh("run " + write_config(dir, minimal_config()).string() + " --out " + (dir / "o").string() +
           " --set seed=3") == 0);
  CHECK(sh("inspect " + (dir / "o" / "run.jsonl").string()) == 0);
}
