#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "log2ns/json_io.hpp"

namespace log2ns {

std::string sha256_hex(std::string_view data);

struct ArtifactEntry {
  std::string path;    // relative to the store root
  std::string sha256;
};

struct StageRecord {
  std::string stage;
  std::string key;  // hash of parameters and input artifact hashes
  std::string command;
  Json parameters;
  std::string created_at;  // UTC, ISO 8601
  std::map<std::string, ArtifactEntry> artifacts;
};

// Content-addressed artifact directory:
//   <root>/manifest.json
//   <root>/objects/<first two hex digits>/<sha256>
// Objects are write-once. Re-running a stage with new output records a new
// entry and moves the superseded one into the manifest history.
class ProjectStore {
 public:
  // --store flag, then $LOG2NS_STORE, then ./log2ns-store.
  static std::filesystem::path resolve_root(
      const std::optional<std::filesystem::path>& flag);

  // Opens (creating if needed) the store at `root`.
  explicit ProjectStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  const std::map<std::string, StageRecord>& stages() const { return stages_; }
  const StageRecord* stage(std::string_view name) const;
  const std::vector<StageRecord>& history() const { return history_; }

  // Stores `bytes` and returns the entry for it.
  ArtifactEntry put(std::string_view bytes);
  // Reads an object back and checks its hash.
  std::string read(const ArtifactEntry& entry) const;
  // Throws NotFoundError naming the stage or artifact.
  std::string read(std::string_view stage, std::string_view artifact) const;
  // True when every object of the record exists with a matching hash.
  bool intact(const StageRecord& record) const;

  // Replaces the stage's record and rewrites manifest.json.
  void record(StageRecord record);

  Json manifest_json() const;

 private:
  void save() const;

  std::filesystem::path root_;
  std::map<std::string, StageRecord> stages_;
  std::vector<StageRecord> history_;
};

// Exclusive lock for pipeline runs: <root>/lock, created with O_EXCL.
class StoreLock {
 public:
  explicit StoreLock(const std::filesystem::path& root);
  ~StoreLock();
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace log2ns
