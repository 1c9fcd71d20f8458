#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace rpctunnel {

enum class LogLevel { error = 0, info = 1, debug = 2 };

void set_log_level(LogLevel level);
LogLevel log_level();

// printf-style logging to standard error.
void logf(LogLevel level, const char* fmt, ...) __attribute__((format(printf, 2, 3)));

#define RT_LOG_ERROR(...) ::rpctunnel::logf(::rpctunnel::LogLevel::error, __VA_ARGS__)
#define RT_LOG_INFO(...) ::rpctunnel::logf(::rpctunnel::LogLevel::info, __VA_ARGS__)
#define RT_LOG_DEBUG(...) ::rpctunnel::logf(::rpctunnel::LogLevel::debug, __VA_ARGS__)

// Hex rendering of the first max_bytes of a buffer, for debug-level wire dumps.
std::string hex_dump(std::span<const uint8_t> data, size_t max_bytes = 64);

}  // namespace rpctunnel
