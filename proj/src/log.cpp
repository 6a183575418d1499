#include "stlfunnel/log.hpp"

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace stlfunnel {

namespace {

LogLevel level_from_env()
{
    const char* v = std::getenv("STLFUNNEL_LOG");
    if (v == nullptr) {
        return LogLevel::Warn;
    }
    const std::string s(v);
    if (s == "quiet" || s == "0") {
        return LogLevel::Quiet;
    }
    if (s == "error" || s == "1") {
        return LogLevel::Error;
    }
    if (s == "info" || s == "3") {
        return LogLevel::Info;
    }
    if (s == "debug" || s == "4") {
        return LogLevel::Debug;
    }
    return LogLevel::Warn;
}

std::atomic<int>& current_level()
{
    static std::atomic<int> level{static_cast<int>(level_from_env())};
    return level;
}

const char* label(LogLevel l)
{
    switch (l) {
    case LogLevel::Error:
        return "error";
    case LogLevel::Warn:
        return "warn";
    case LogLevel::Info:
        return "info";
    case LogLevel::Debug:
        return "debug";
    default:
        return "";
    }
}

} // namespace

LogLevel log_level() { return static_cast<LogLevel>(current_level().load()); }

void set_log_level(LogLevel level) { current_level().store(static_cast<int>(level)); }

void log_message(LogLevel level, std::string_view message)
{
    if (level == LogLevel::Quiet || static_cast<int>(level) > current_level().load()) {
        return;
    }
    std::fprintf(stderr, "[%s] %.*s\n", label(level), static_cast<int>(message.size()), message.data());
}

std::string fnv1a_hex(std::string_view data)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace stlfunnel
