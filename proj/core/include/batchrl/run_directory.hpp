#pragma once

// Output directory of one CLI run. Files are written through a single
// RunDirectory object, are never overwritten, and manifest.json is written
// last: its presence marks a complete run.

#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "batchrl/batch2batch.hpp"

namespace batchrl {

inline constexpr const char* kManifestName = "manifest.json";

// Hex SHA-1 of "blob <size>\0<content>", as `git hash-object` prints it.
std::string git_blob_sha1(std::string_view content);

struct ManifestEntry {
  std::string path;  // relative, forward slashes
  std::string sha1;
  std::size_t bytes = 0;
};

struct Manifest {
  std::string run_id;
  std::string command;
  std::string started_utc;
  std::string finished_utc;
  std::string config_json;
  std::vector<ManifestEntry> artifacts;
};

class RunDirectory {
 public:
  // Creates `root` (and parents). Throws ConfigError when it already exists
  // and is not an empty directory.
  RunDirectory(std::filesystem::path root, std::string command);

  const std::filesystem::path& root() const { return root_; }

  // Writes root/relative. Throws StateError if the file exists or the run
  // has been finalized.
  void write(const std::string& relative, std::string_view content);

  // Writes the manifest. `config_json` is embedded verbatim as an object.
  Manifest finalize(const std::string& config_json);

  bool finalized() const { return finalized_; }

 private:
  std::filesystem::path root_;
  std::string command_;
  std::string started_utc_;
  std::vector<ManifestEntry> entries_;
  bool finalized_ = false;
  std::mutex mutex_;
};

// Checkpoints go to checkpoints/<phase>_epoch_NNN.txt inside the run.
class RunCheckpointSink : public CheckpointSink {
 public:
  explicit RunCheckpointSink(RunDirectory& run) : run_(run) {}
  std::string store(Phase phase, std::size_t epoch, const PolicyParams& params) override;

 private:
  RunDirectory& run_;
};

// Throws ConfigError when `root` has no manifest (an incomplete or foreign
// directory).
Manifest read_manifest(const std::filesystem::path& root);

// Re-hashes every artifact; returns the paths whose content changed.
std::vector<std::string> verify_manifest(const std::filesystem::path& root,
                                         const Manifest& manifest);

std::string read_text_file(const std::filesystem::path& path);

std::string utc_timestamp();

}  // namespace batchrl
