#pragma once

#include <iostream>
#include <sstream>
#include <string>

namespace camforge {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level();
void set_log_level(LogLevel level);
// Reads CAMFORGE_LOG (error/warn/info/debug); unknown values keep the default.
void init_log_from_env();

void log_line(LogLevel level, const std::string& msg);

} // namespace camforge

#define CAMFORGE_LOG(level, expr)                                             \
    do {                                                                      \
        if (static_cast<int>(level) <= static_cast<int>(::camforge::log_level())) { \
            std::ostringstream camforge_log_ss;                               \
            camforge_log_ss << expr;                                          \
            ::camforge::log_line(level, camforge_log_ss.str());               \
        }                                                                     \
    } while (0)

#define LOG_ERROR(expr) CAMFORGE_LOG(::camforge::LogLevel::error, expr)
#define LOG_WARN(expr) CAMFORGE_LOG(::camforge::LogLevel::warn, expr)
#define LOG_INFO(expr) CAMFORGE_LOG(::camforge::LogLevel::info, expr)
#define LOG_DEBUG(expr) CAMFORGE_LOG(::camforge::LogLevel::debug, expr)
