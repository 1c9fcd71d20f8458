#include "rpctunnel/log.hpp"

#include <atomic>
#include <cstdarg>
#include <cstdio>

namespace rpctunnel {

namespace {
std::atomic<LogLevel> g_level{LogLevel::info};

const char* level_tag(LogLevel level) {
    switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
    }
    return "?";
}
}  // namespace

void set_log_level(LogLevel level) { g_level.store(level); }
LogLevel log_level() { return g_level.load(); }

void logf(LogLevel level, const char* fmt, ...) {
    if (level > g_level.load()) return;
    char buf[1024];
    va_list ap;
    va_start(ap, fmt);
    vsnprintf(buf, sizeof(buf), fmt, ap);
    va_end(ap);
    fprintf(stderr, "[%s] %s\n", level_tag(level), buf);
}

std::string hex_dump(std::span<const uint8_t> data, size_t max_bytes) {
    static const char digits[] = "0123456789abcdef";
    size_t n = data.size() < max_bytes ? data.size() : max_bytes;
    std::string out;
    out.reserve(n * 3 + 8);
    for (size_t i = 0; i < n; i++) {
        if (i) out.push_back(' ');
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0xf]);
    }
    if (n < data.size()) out += " ...";
    return out;
}

}  // namespace rpctunnel
