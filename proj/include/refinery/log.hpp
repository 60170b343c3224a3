// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <string>

namespace refinery::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

Level level();
void set_level(Level lv);
// Parses "debug"/"info"/"warn"/"error"/"off"; unknown strings leave the level
// unchanged. REFINERY_LOG, when set, wins over programmatic configuration.
void set_level(const std::string& name);
void init_from_env();

void write(Level lv, const std::string& msg);

inline void debug(const std::string& msg) { write(Level::Debug, msg); }
inline void info(const std::string& msg) { write(Level::Info, msg); }
inline void warn(const std::string& msg) { write(Level::Warn, msg); }
inline void error(const std::string& msg) { write(Level::Error, msg); }

} // namespace refinery::log
