#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "feddiv/config.hpp"

namespace feddiv::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kParseError = 1;    // missing/unreadable/malformed input
inline constexpr int kInvalidConfig = 2; // config parsed but violates an invariant

// Reads, overrides and validates a config. Throws std::runtime_error for
// parse problems and ConfigError for semantic ones.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

int run(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
        const std::vector<std::string>& overrides, std::ostream& out, std::ostream& err);

inline constexpr const char* kCompareHeader = "variant,best_acc,final_acc,mean_filtering_acc";

int compare(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
            const std::vector<std::string>& overrides, std::ostream& out, std::ostream& err);

int inspect(const std::filesystem::path& log_path, std::ostream& out, std::ostream& err);

}  // namespace feddiv::cli
