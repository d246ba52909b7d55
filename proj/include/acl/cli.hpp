#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "acl/error.hpp"

namespace acl {
namespace cli {

inline constexpr const char* kToolVersion = "1.0.0";

// The only config values a flag may override; everything else comes from the
// file so the manifest stays authoritative.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};

// 0 success, 2 config error, 3 data error, 4 numeric or internal failure.
int exit_code_for(Err kind);

int cmd_gen_data(const std::filesystem::path& config_path, const Overrides& overrides);
int cmd_train(const std::filesystem::path& config_path, const Overrides& overrides);
int cmd_probe(const std::filesystem::path& checkpoint_path,
              const std::filesystem::path& data_dir,
              const std::optional<std::string>& output_dir);
int cmd_metrics(const std::filesystem::path& embeddings_csv, double t,
                const std::optional<std::string>& output_dir);
int cmd_sweep(const std::filesystem::path& config_path, const std::string& axis,
              const std::vector<double>& values, const Overrides& overrides);

}  // namespace cli
}  // namespace acl
