#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rpctunnel/config.hpp"
#include "rpctunnel/tunnel_client.hpp"

namespace rpctunnel {

inline constexpr const char* kTcpFilterSynopsis =
    "usage: tcpfilter <source port> <destination machine> <destination port>";
inline constexpr const char* kRpcFilterSynopsis =
    "usage: rpcfilter <server machine address> <program number> <version numbers>\n"
    "       [--gateway <url>] [--portmapper <host:port>] [--listen-port <port>]\n"
    "       [--ca-file <path>] [--insecure] [--log-level <error|info|debug>]";

struct TcpFilterArgs {
    uint16_t source_port = 0;
    std::string destination_host;
    uint16_t destination_port = 0;
    LogLevel log_level = LogLevel::info;
};

// Three positionals, ports in 1-65535. Throws UsageError carrying the
// synopsis above.
TcpFilterArgs parse_tcpfilter_args(const std::vector<std::string>& args);

struct RpcFilterArgs {
    TunnelEndpointConfig config;
    LogLevel log_level = LogLevel::info;
};

// Positionals exactly as the original invocation format, plus flags.
// Throws UsageError.
RpcFilterArgs parse_rpcfilter_args(const std::vector<std::string>& args);

// Shared small parsers.
uint16_t parse_listen_port(const std::string& text);  // 1-65535
uint32_t parse_u32_arg(const std::string& text);

}  // namespace rpctunnel
