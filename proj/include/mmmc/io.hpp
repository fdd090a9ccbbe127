#ifndef MMMC_IO_HPP
#define MMMC_IO_HPP

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <string>
#include <type_traits>

#include "mmmc/errors.hpp"

namespace mmmc {

inline constexpr const char* version_string = "0.1.0";

/// Shortest round-trip decimal form of a double.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Six significant digits, for console summaries.
inline std::string format_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string format_hash(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

/// FNV-1a over sorted key=value pairs; used to tag outputs of commands
/// driven by flags rather than a config file.
inline std::uint64_t hash_parameters(const std::map<std::string, std::string>& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [k, v] : params) {
    for (char ch : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

/// CSV file with a leading `# config_hash=..., seed=..., version=...` line and a header row.
class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, std::uint64_t config_hash, std::uint64_t seed,
            std::initializer_list<const char*> header)
      : path_(path), out_(path) {
    if (!out_) throw InvalidData("cannot open " + path.string() + " for writing");
    out_ << "# config_hash=" << format_hash(config_hash) << ", seed=" << seed << ", version=" << version_string << '\n';
    bool first = true;
    for (const char* h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << '\n';
  }

  template <typename... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(values), first = false), ...);
    out_ << '\n';
    if (!out_) throw InvalidData("write to " + path_.string() + " failed");
  }

private:
  template <typename T>
  static std::string cell(const T& v) {
    if constexpr (std::is_floating_point_v<T>) return format_number(static_cast<double>(v));
    else if constexpr (std::is_integral_v<T>) return std::to_string(v);
    else return std::string(v);
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace mmmc

#endif  // MMMC_IO_HPP
