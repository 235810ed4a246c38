#include "bsr/log.hpp"

#include <cstdlib>
#include <iostream>

namespace bsr::log {

namespace {

Level parse(const char* s) {
  if (!s) return Level::warn;
  const std::string v = s;
  if (v == "error") return Level::error;
  if (v == "info") return Level::info;
  if (v == "debug") return Level::debug;
  return Level::warn;
}

const char* label(Level level) {
  switch (level) {
    case Level::error: return "error";
    case Level::warn: return "warn";
    case Level::info: return "info";
    case Level::debug: return "debug";
  }
  return "?";
}

}  // namespace

Level threshold() {
  static const Level level = parse(std::getenv("BSR_LOG"));
  return level;
}

bool enabled(Level level) { return static_cast<int>(level) <= static_cast<int>(threshold()); }

void write(Level level, const std::string& message) {
  std::cerr << "[" << label(level) << "] " << message << "\n";
}

}  // namespace bsr::log
