#pragma once

#include <string>
#include <string_view>

namespace stlfunnel {

enum class LogLevel { Quiet = 0, Error = 1, Warn = 2, Info = 3, Debug = 4 };

/// Verbosity from STLFUNNEL_LOG (quiet, error, warn, info, debug); warn when unset.
LogLevel log_level();
void set_log_level(LogLevel level);

/// Writes "[level] message" to stderr when `level` is enabled.
void log_message(LogLevel level, std::string_view message);

inline void log_warn(std::string_view m) { log_message(LogLevel::Warn, m); }
inline void log_info(std::string_view m) { log_message(LogLevel::Info, m); }
inline void log_debug(std::string_view m) { log_message(LogLevel::Debug, m); }

/// 64-bit FNV-1a of `data` as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

} // namespace stlfunnel
