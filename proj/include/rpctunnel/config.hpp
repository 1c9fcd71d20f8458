#pragma once

#include <string>

#include "rpctunnel/gateway.hpp"
#include "rpctunnel/log.hpp"

namespace rpctunnel {

// Effective gateway configuration: defaults, overridden by a config file,
// overridden by flags. Printable (format_config) and reloadable; the
// round trip is lossless.
struct RuntimeConfig {
    LogLevel log_level = LogLevel::info;
    std::string listen;      // "host:port"; empty until configured
    std::string portmapper;  // "host:port"
    TlsServerConfig tls;
    GatewayPolicy policy;

    bool operator==(const RuntimeConfig&) const = default;
};

// `key = value` lines under [gateway], [policy] and [tls] sections.
// Unknown keys are warnings; malformed lines raise ConfigError with the
// line number.
RuntimeConfig parse_config_text(const std::string& text, RuntimeConfig base = {});
RuntimeConfig load_config(const std::string& path, RuntimeConfig base = {});

// Canonical config-file rendering of the effective configuration.
std::string format_config(const RuntimeConfig& config);

const char* log_level_name(LogLevel level);
LogLevel parse_log_level(const std::string& name);  // throws ConfigError

}  // namespace rpctunnel
