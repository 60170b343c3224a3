// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include "refinery/log.hpp"

#include <cstdlib>

namespace refinery::log {

namespace {
Level g_level = Level::Warn;
bool g_env_locked = false;

const char* name_of(Level lv) {
    switch (lv) {
        case Level::Debug: return "debug";
        case Level::Info: return "info";
        case Level::Warn: return "warn";
        case Level::Error: return "error";
        default: return "off";
    }
}
} // namespace

Level level() { return g_level; }

void set_level(Level lv) {
    if (!g_env_locked) g_level = lv;
}

void set_level(const std::string& name) {
    if (g_env_locked) return;
    if (name == "debug") g_level = Level::Debug;
    else if (name == "info") g_level = Level::Info;
    else if (name == "warn" || name == "warning") g_level = Level::Warn;
    else if (name == "error") g_level = Level::Error;
    else if (name == "off" || name == "none") g_level = Level::Off;
}

void init_from_env() {
    const char* env = std::getenv("REFINERY_LOG");
    if (env && *env) {
        set_level(std::string(env));
        g_env_locked = true;
    }
}

void write(Level lv, const std::string& msg) {
    if (lv < g_level) return;
    std::fprintf(stderr, "[refinery:%s] %s\n", name_of(lv), msg.c_str());
}

} // namespace refinery::log
