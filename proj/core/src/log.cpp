// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace synthgt::log {
namespace {

std::atomic<Level> g_level{Level::kWarn};
std::mutex g_mutex;

void emit(Level at, const char* tag, std::string_view message) {
  if (at < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "[" << tag << "] " << message << '\n';
}

}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

bool parse_level(std::string_view name, Level& out) {
  if (name == "debug") out = Level::kDebug;
  else if (name == "info") out = Level::kInfo;
  else if (name == "warn") out = Level::kWarn;
  else if (name == "error") out = Level::kError;
  else if (name == "off") out = Level::kOff;
  else return false;
  return true;
}

void debug(std::string_view message) { emit(Level::kDebug, "debug", message); }
void info(std::string_view message) { emit(Level::kInfo, "info", message); }
void warn(std::string_view message) { emit(Level::kWarn, "warn", message); }
void error(std::string_view message) { emit(Level::kError, "error", message); }

}  // namespace synthgt::log
