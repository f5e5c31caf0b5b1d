#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "dip/result.hpp"

namespace dip {

inline Result<std::string> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return make_error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) return make_error(Errc::io_error, "read failed for " + path.string());
  return buf.str();
}

inline Result<void> ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return make_error(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());
  return Result<void>{};
}

/// Write-to-temp then rename, so readers never observe a half-written file and
/// concurrent writers of identical content are harmless.
inline Result<void> write_file_atomic(const std::filesystem::path& path,
                                      const std::string& content) {
  static std::atomic<unsigned> counter{0};
  if (auto d = ensure_dir(path.parent_path()); !d.ok()) return d.error();
  const std::filesystem::path tmp =
      path.string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(++counter);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return make_error(Errc::io_error, "cannot create " + tmp.string());
    out << content;
    if (!out.good()) {
      out.close();
      std::remove(tmp.c_str());
      return make_error(Errc::io_error, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    return make_error(Errc::io_error,
                      "cannot move " + tmp.string() + " into place: " + ec.message());
  }
  return Result<void>{};
}

}  // namespace dip
