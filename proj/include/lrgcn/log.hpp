#pragma once
// Tiny stderr logger. Verbosity comes from the SKGC_LOG env var:
// quiet|0, info|1 (default), debug|2.

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace lrgcn {

enum class LogLevel : int { Quiet = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("SKGC_LOG");
        if (!env) return LogLevel::Info;
        if (!std::strcmp(env, "quiet") || !std::strcmp(env, "0")) return LogLevel::Quiet;
        if (!std::strcmp(env, "debug") || !std::strcmp(env, "2")) return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
    if (log_level() >= LogLevel::Info) {
        std::fprintf(stderr, "[lrgcn] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

template <typename... Args>
void log_debug(const char* fmt, Args... args) {
    if (log_level() >= LogLevel::Debug) {
        std::fprintf(stderr, "[lrgcn:debug] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

}  // namespace lrgcn
