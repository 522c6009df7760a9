#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"

#include "darkdns/error.hpp"

namespace darkdns {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// state.json in a directory: a header line with the body length and checksum,
/// then the JSON body. Writes go to a temporary file that is renamed into place.
class StateStore {
 public:
  explicit StateStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path path() const { return dir_ / "state.json"; }

  void save(const nlohmann::json& state) const {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::StartupError, "cannot create state directory " + dir_.string());
    const std::string body = state.dump();
    char header[96];
    std::snprintf(header, sizeof header, "darkdns-state 1 %zu %016llx\n", body.size(),
                  static_cast<unsigned long long>(fnv1a64(body)));
    const auto tmp = dir_ / "state.json.tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::StartupError, "cannot write " + tmp.string());
    const std::string data = std::string(header) + body;
    std::size_t off = 0;
    while (off < data.size()) {
      const auto n = ::write(fd, data.data() + off, data.size() - off);
      if (n <= 0) {
        ::close(fd);
        throw Error(ErrorCode::StartupError, "short write to " + tmp.string());
      }
      off += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
    std::filesystem::rename(tmp, path());
  }

  /// nullopt when no checkpoint exists (cold start).
  std::optional<nlohmann::json> load() const {
    if (!std::filesystem::exists(path())) return std::nullopt;
    std::ifstream in(path(), std::ios::binary);
    std::string header;
    if (!std::getline(in, header)) corrupt("missing header");
    std::istringstream hs(header);
    std::string magic, csum_hex;
    int version = 0;
    std::size_t length = 0;
    if (!(hs >> magic >> version >> length >> csum_hex) || magic != "darkdns-state" || version != 1) {
      corrupt("bad header");
    }
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (body.size() != length) {
      corrupt("expected " + std::to_string(length) + " bytes, found " + std::to_string(body.size()));
    }
    std::uint64_t expected = 0;
    try {
      expected = std::stoull(csum_hex, nullptr, 16);
    } catch (const std::exception&) {
      corrupt("bad checksum field");
    }
    if (expected != fnv1a64(body)) corrupt("checksum mismatch");
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) corrupt("body is not valid JSON");
    return j;
  }

 private:
  [[noreturn]] void corrupt(const std::string& why) const {
    throw Error(ErrorCode::CorruptCheckpoint, path().string() + ": " + why);
  }

  std::filesystem::path dir_;
};

}  // namespace darkdns
