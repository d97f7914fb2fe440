#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "svph/errors.hpp"

namespace svph {

inline constexpr const char* tool_version = "1.0.0";

/// 64-bit FNV-1a of a byte string, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

/// Everything needed to rerun a command: inputs, every parameter with its
/// effective value, seed, version and wall time.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string map_file;
  std::string map_hash;
  nlohmann::json parameters = nlohmann::json::object();
  std::uint64_t seed = 0;
  int threads = 0;
  double wall_time = 0.0;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const {
    return {{"command", command},   {"argv", argv},     {"map_file", map_file}, {"map_hash", map_hash},
            {"parameters", parameters}, {"seed", seed}, {"threads", threads},   {"version", tool_version},
            {"wall_time_s", wall_time}, {"outputs", outputs}};
  }
};

/// Wall clock from construction.
class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

/// Formats doubles with round-trip precision so CSV files diff exactly.
inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Minimal CSV writer with a fixed header.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw ConfigError("cannot write '" + path.string() + "'");
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  template <typename... T>
  void values(const T&... v) {
    std::vector<std::string> cells;
    (cells.push_back(cell(v)), ...);
    row(cells);
  }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << std::setw(2) << j << '\n';
}

}  // namespace svph
