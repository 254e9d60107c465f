#pragma once

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace cellspace::log {

enum class Level { error = 0, info = 1, debug = 2 };

/// Verbosity from CELLSPACE_LOG (error|info|debug); defaults to error.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("CELLSPACE_LOG");
    if (env == nullptr) return Level::error;
    const std::string_view v{env};
    if (v == "debug") return Level::debug;
    if (v == "info") return Level::info;
    return Level::error;
  }();
  return level;
}

inline void write(Level level, std::string_view tag, std::string_view msg) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  std::cerr << "[cellspace:" << tag << "] " << msg << '\n';
}

inline void error(std::string_view msg) { write(Level::error, "error", msg); }
inline void warn(std::string_view msg) { write(Level::error, "warn", msg); }
inline void info(std::string_view msg) { write(Level::info, "info", msg); }
inline void debug(std::string_view msg) { write(Level::debug, "debug", msg); }

}  // namespace cellspace::log
