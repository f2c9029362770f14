#include "camforge/log.hpp"

#include <cstdlib>

namespace camforge {

namespace {
LogLevel g_level = LogLevel::warn;

const char* level_name(LogLevel l) {
    switch (l) {
        case LogLevel::error: return "error";
        case LogLevel::warn: return "warn";
        case LogLevel::info: return "info";
        case LogLevel::debug: return "debug";
    }
    return "?";
}
} // namespace

LogLevel log_level() { return g_level; }

void set_log_level(LogLevel level) { g_level = level; }

void init_log_from_env() {
    const char* v = std::getenv("CAMFORGE_LOG");
    if (!v) return;
    std::string s(v);
    if (s == "error") g_level = LogLevel::error;
    else if (s == "warn") g_level = LogLevel::warn;
    else if (s == "info") g_level = LogLevel::info;
    else if (s == "debug") g_level = LogLevel::debug;
}

void log_line(LogLevel level, const std::string& msg) {
    std::cerr << "[" << level_name(level) << "] " << msg << "\n";
}

} // namespace camforge
