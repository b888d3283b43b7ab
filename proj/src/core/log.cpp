#include "core/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace agman {

namespace {

LogLevel g_level = [] {
  const char* env = std::getenv("AGMAN_LOG");
  if (!env) return LogLevel::info;
  if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
  if (std::strcmp(env, "error") == 0) return LogLevel::error;
  return LogLevel::info;
}();

}  // namespace

LogLevel log_level() { return g_level; }
void set_log_level(LogLevel level) { g_level = level; }

void log_info(const std::string& msg) {
  if (g_level >= LogLevel::info) std::fprintf(stderr, "[agman] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
  if (g_level >= LogLevel::debug) std::fprintf(stderr, "[agman:debug] %s\n", msg.c_str());
}

void log_error(const std::string& msg) { std::fprintf(stderr, "[agman:error] %s\n", msg.c_str()); }

}  // namespace agman
