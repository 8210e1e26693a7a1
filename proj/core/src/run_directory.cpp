#include "batchrl/run_directory.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "batchrl/checkpoint.hpp"
#include "batchrl/errors.hpp"
#include "json.hpp"

namespace batchrl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("EVP_MD_CTX_new failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &length) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunDirectory::RunDirectory(fs::path root, std::string command)
    : root_(std::move(root)), command_(std::move(command)), started_utc_(utc_timestamp()) {
  std::error_code ec;
  if (fs::exists(root_, ec)) {
    if (!fs::is_directory(root_, ec)) {
      throw ConfigError("output path '" + root_.string() + "' exists and is not a directory");
    }
    if (!fs::is_empty(root_, ec)) {
      throw ConfigError("output directory '" + root_.string() +
                        "' is not empty; refusing to modify an existing run");
    }
  }
  fs::create_directories(root_, ec);
  if (ec) {
    throw ConfigError("cannot create output directory '" + root_.string() + "': " + ec.message());
  }
}

void RunDirectory::write(const std::string& relative, std::string_view content) {
  std::lock_guard lock(mutex_);
  if (finalized_) throw StateError("run directory already finalized");
  const fs::path target = root_ / relative;
  if (fs::exists(target)) throw StateError("refusing to overwrite '" + target.string() + "'");
  fs::create_directories(target.parent_path());
  {
    std::ofstream out(target, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + target.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("write failed for '" + target.string() + "'");
  }
  entries_.push_back({fs::path(relative).generic_string(), git_blob_sha1(content), content.size()});
}

Manifest RunDirectory::finalize(const std::string& config_json) {
  std::lock_guard lock(mutex_);
  if (finalized_) throw StateError("run directory already finalized");
  Manifest m;
  m.command = command_;
  m.started_utc = started_utc_;
  m.finished_utc = utc_timestamp();
  m.config_json = config_json;
  m.artifacts = entries_;
  std::sort(m.artifacts.begin(), m.artifacts.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  std::string fingerprint = command_ + "\n" + config_json;
  for (const auto& e : m.artifacts) fingerprint += e.path + " " + e.sha1 + "\n";
  m.run_id = git_blob_sha1(fingerprint).substr(0, 12);

  json j;
  j["run_id"] = m.run_id;
  j["command"] = m.command;
  j["started_utc"] = m.started_utc;
  j["finished_utc"] = m.finished_utc;
  j["config"] = json::parse(config_json);
  j["artifacts"] = json::array();
  for (const auto& e : m.artifacts) {
    j["artifacts"].push_back({{"path", e.path}, {"sha1", e.sha1}, {"bytes", e.bytes}});
  }
  const std::string text = j.dump(2) + "\n";
  const fs::path target = root_ / kManifestName;
  std::ofstream out(target, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("cannot write '" + target.string() + "'");
  finalized_ = true;
  return m;
}

std::string RunCheckpointSink::store(Phase phase, std::size_t epoch, const PolicyParams& params) {
  const std::string rel = "checkpoints/" + checkpoint_name(phase, epoch);
  run_.write(rel, write_checkpoint(params));
  return rel;
}

Manifest read_manifest(const fs::path& root) {
  const fs::path path = root / kManifestName;
  if (!fs::exists(path)) {
    throw ConfigError("'" + root.string() +
                      "' has no manifest.json: the run is incomplete or not a run directory");
  }
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest in '" + root.string() + "': " + e.what());
  }
  Manifest m;
  try {
    m.run_id = j.at("run_id").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.started_utc = j.at("started_utc").get<std::string>();
    m.finished_utc = j.at("finished_utc").get<std::string>();
    m.config_json = j.at("config").dump(2) + "\n";
    for (const json& e : j.at("artifacts")) {
      m.artifacts.push_back({e.at("path").get<std::string>(), e.at("sha1").get<std::string>(),
                             e.at("bytes").get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest in '" + root.string() + "': " + e.what());
  }
  return m;
}

std::vector<std::string> verify_manifest(const fs::path& root, const Manifest& manifest) {
  std::vector<std::string> changed;
  for (const auto& e : manifest.artifacts) {
    const fs::path p = root / e.path;
    if (!fs::exists(p) || git_blob_sha1(read_text_file(p)) != e.sha1) changed.push_back(e.path);
  }
  return changed;
}

}  // namespace batchrl
