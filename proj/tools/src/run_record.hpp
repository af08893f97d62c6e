#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace prefrobust::cli {

/// Git blob hash: SHA-1 of "blob <size>\0" followed by the content, as lowercase hex.
std::string git_blob_hash(std::string_view content);
std::string git_blob_hash_file(const std::filesystem::path& path);

/// Provenance of one command invocation, written next to each output as `<output>.run.json`.
struct RunRecord {
  std::string command_line;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  double wall_time_seconds = 0.0;

  /// Hashes inputs and outputs as they are on disk now and writes one sidecar per output.
  void write_sidecars() const;
};

std::filesystem::path sidecar_path(const std::filesystem::path& output);

}  // namespace prefrobust::cli
