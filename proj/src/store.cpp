#include "log2ns/store.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "log2ns/error.hpp"

namespace log2ns {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

Json record_json(const StageRecord& r) {
  Json artifacts = Json::object();
  for (const auto& [name, a] : r.artifacts) {
    artifacts[name] = {{"path", a.path}, {"sha256", a.sha256}};
  }
  return {{"stage", r.stage},
          {"key", r.key},
          {"command", r.command},
          {"parameters", r.parameters},
          {"created_at", r.created_at},
          {"artifacts", artifacts}};
}

StageRecord record_from_json(const Json& j) {
  StageRecord r;
  r.stage = j.at("stage").get<std::string>();
  r.key = j.at("key").get<std::string>();
  r.command = j.value("command", std::string());
  r.parameters = j.value("parameters", Json::object());
  r.created_at = j.value("created_at", std::string());
  for (const auto& [name, a] : j.at("artifacts").items()) {
    r.artifacts[name] = {a.at("path").get<std::string>(),
                         a.at("sha256").get<std::string>()};
  }
  return r;
}

}  // namespace

fs::path ProjectStore::resolve_root(const std::optional<fs::path>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("LOG2NS_STORE"); env && *env) return env;
  return "log2ns-store";
}

ProjectStore::ProjectStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "objects");
  const fs::path manifest = root_ / "manifest.json";
  if (!fs::exists(manifest)) return;
  Json doc;
  try {
    doc = Json::parse(read_file(manifest));
  } catch (const Json::exception& e) {
    throw Error("corrupt manifest " + manifest.string() + ": " + e.what());
  }
  for (const auto& [name, rec] : doc.at("stages").items()) {
    stages_[name] = record_from_json(rec);
  }
  if (doc.contains("history")) {
    for (const auto& rec : doc.at("history")) {
      history_.push_back(record_from_json(rec));
    }
  }
}

const StageRecord* ProjectStore::stage(std::string_view name) const {
  auto it = stages_.find(std::string(name));
  return it == stages_.end() ? nullptr : &it->second;
}

ArtifactEntry ProjectStore::put(std::string_view bytes) {
  ArtifactEntry e;
  e.sha256 = sha256_hex(bytes);
  e.path = "objects/" + e.sha256.substr(0, 2) + "/" + e.sha256;
  const fs::path full = root_ / e.path;
  if (fs::exists(full)) return e;
  fs::create_directories(full.parent_path());
  write_file_atomic(full, bytes);
  return e;
}

std::string ProjectStore::read(const ArtifactEntry& entry) const {
  std::string bytes = read_file(root_ / entry.path);
  if (sha256_hex(bytes) != entry.sha256) {
    throw Error("artifact " + entry.path + " does not match its hash");
  }
  return bytes;
}

std::string ProjectStore::read(std::string_view stage_name,
                               std::string_view artifact) const {
  const StageRecord* rec = stage(stage_name);
  if (!rec) {
    throw NotFoundError("store has no '" + std::string(stage_name) +
                        "' stage");
  }
  auto it = rec->artifacts.find(std::string(artifact));
  if (it == rec->artifacts.end()) {
    throw NotFoundError("stage '" + std::string(stage_name) +
                        "' has no artifact '" + std::string(artifact) + "'");
  }
  return read(it->second);
}

bool ProjectStore::intact(const StageRecord& record) const {
  for (const auto& [name, entry] : record.artifacts) {
    const fs::path full = root_ / entry.path;
    if (!fs::exists(full)) return false;
    if (sha256_hex(read_file(full)) != entry.sha256) return false;
  }
  return true;
}

void ProjectStore::record(StageRecord rec) {
  if (rec.created_at.empty()) {
    const auto now = std::chrono::system_clock::to_time_t(
        std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    rec.created_at = buf;
  }
  auto it = stages_.find(rec.stage);
  if (it != stages_.end()) history_.push_back(std::move(it->second));
  stages_[rec.stage] = std::move(rec);
  save();
}

Json ProjectStore::manifest_json() const {
  Json stages = Json::object();
  for (const auto& [name, rec] : stages_) stages[name] = record_json(rec);
  Json history = Json::array();
  for (const auto& rec : history_) history.push_back(record_json(rec));
  return {{"version", 1}, {"stages", stages}, {"history", history}};
}

void ProjectStore::save() const {
  write_file_atomic(root_ / "manifest.json", manifest_json().dump(2) + "\n");
}

StoreLock::StoreLock(const fs::path& root) : path_(root / "lock") {
  fs::create_directories(root);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw Error("store " + root.string() +
                " is locked by another pipeline run (remove " +
                path_.string() + " if that run is gone)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  (void)!::write(fd, pid.data(), pid.size());
  ::close(fd);
}

StoreLock::~StoreLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace log2ns
