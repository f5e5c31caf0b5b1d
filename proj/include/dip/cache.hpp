#pragma once

#include <nlohmann/json.hpp>
#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dip/chat.hpp"
#include "dip/result.hpp"

namespace dip {

inline constexpr int kCacheSchemaVersion = 1;

struct CacheEntry {
  ChatRequest request;
  CompletionRecord record;
};

inline void to_json(nlohmann::json& j, const CacheEntry& e) {
  j = nlohmann::json{{"schema_version", kCacheSchemaVersion},
                     {"request", e.request},
                     {"record", e.record}};
}

inline void from_json(const nlohmann::json& j, CacheEntry& e) {
  e.request = j.at("request").get<ChatRequest>();
  e.record = j.at("record").get<CompletionRecord>();
}

/// Content-addressed response store: one JSON file per request digest under
/// `<dir>/<first-2-hex>/<digest>.json`. Writes go through a temp file and a
/// rename, so concurrent writers of the same key land on identical content and
/// readers never observe partial files.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path entry_path(const std::string& digest) const {
    return dir_ / digest.substr(0, 2) / (digest + ".json");
  }

  bool contains(const std::string& digest) const {
    std::error_code ec;
    return std::filesystem::exists(entry_path(digest), ec);
  }

  /// nullopt = miss. A present-but-unreadable entry is an error, not a miss.
  Result<std::optional<CacheEntry>> load(const std::string& digest) const {
    const auto path = entry_path(digest);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::optional<CacheEntry>{};
    std::ifstream in(path, std::ios::binary);
    if (!in) return make_error(Errc::io_error, "cannot open cache entry " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      CacheEntry entry = nlohmann::json::parse(buf.str()).get<CacheEntry>();
      return std::optional<CacheEntry>{std::move(entry)};
    } catch (const std::exception& e) {
      return make_error(Errc::io_error, "corrupt cache entry " + path.string() + ": " + e.what());
    }
  }

  Result<void> store(const std::string& digest, const CacheEntry& entry) const {
    const auto path = entry_path(digest);
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) return make_error(Errc::io_error, "cannot create cache dir: " + ec.message());

    static std::atomic<unsigned> counter{0};
    const auto tmp = path.parent_path() /
                     (digest + ".tmp." + std::to_string(::getpid()) + "." +
                      std::to_string(counter.fetch_add(1)));
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) return make_error(Errc::io_error, "cannot write cache temp " + tmp.string());
      out << nlohmann::json(entry).dump(2) << '\n';
      if (!out) return make_error(Errc::io_error, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      return make_error(Errc::io_error, "cannot publish cache entry: " + path.string());
    }
    return {};
  }

  struct VerifyStats {
    size_t entries = 0;
    std::vector<std::string> corrupt;  // paths with unreadable JSON or digest mismatch
  };

  /// Walks every entry, re-derives the cache key from the stored request, and
  /// checks it against the filename.
  Result<VerifyStats> verify() const {
    VerifyStats stats;
    std::error_code ec;
    if (!std::filesystem::exists(dir_, ec)) return stats;
    for (const auto& file : std::filesystem::recursive_directory_iterator(dir_, ec)) {
      if (!file.is_regular_file() || file.path().extension() != ".json") continue;
      ++stats.entries;
      const std::string name = file.path().stem().string();
      std::ifstream in(file.path(), std::ios::binary);
      std::stringstream buf;
      buf << in.rdbuf();
      try {
        CacheEntry entry = nlohmann::json::parse(buf.str()).get<CacheEntry>();
        if (cache_key(entry.request) != name || entry.record.request_digest != name)
          stats.corrupt.push_back(file.path().string());
      } catch (const std::exception&) {
        stats.corrupt.push_back(file.path().string());
      }
    }
    if (ec) return make_error(Errc::io_error, "cache walk failed: " + ec.message());
    return stats;
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace dip
