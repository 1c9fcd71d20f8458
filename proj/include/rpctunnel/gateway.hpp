#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rpctunnel/net.hpp"
#include "rpctunnel/portmap.hpp"
#include "rpctunnel/rpc_message.hpp"

namespace rpctunnel {

// IPv4 CIDR prefix ("10.0.0.0/8", bare address = /32). Non-IPv4 client
// addresses only match an exact-string entry (covers "::1" on loopback).
struct CidrPrefix {
    std::string text;
    uint32_t network = 0;
    int prefix_len = -1;  // -1 = exact-string entry

    static CidrPrefix parse(const std::string& text);  // throws ConfigError
    bool matches(const std::string& address) const;

    bool operator==(const CidrPrefix&) const = default;
};

struct ProgramAllow {
    uint32_t prog = 0;
    // Empty set = every version of the program.
    std::set<uint32_t> versions;

    static ProgramAllow parse(const std::string& text);  // "100003" or "100003:2,3,4"
    std::string str() const;

    bool operator==(const ProgramAllow&) const = default;
};

// Proxy-level access policy: which programs may be called, which client
// networks may call, where calls may be forwarded.
struct GatewayPolicy {
    std::vector<ProgramAllow> allowed_programs;       // empty = deny all
    std::vector<CidrPrefix> allowed_client_networks;  // empty = any client
    std::string backend_host = "127.0.0.1";           // local machine only by default
    size_t max_record_bytes = kDefaultMaxRecord;

    bool allows_program(uint32_t prog, uint32_t vers) const;
    bool allows_client(const std::string& address) const;

    bool operator==(const GatewayPolicy&) const = default;
};

struct TlsServerConfig {
    std::string certificate_chain;  // PEM path
    std::string private_key;        // PEM path
    std::string client_ca;          // PEM path, used when requiring client certs
    bool require_client_cert = false;

    bool enabled() const { return !certificate_chain.empty(); }

    bool operator==(const TlsServerConfig&) const = default;
};

struct RpcPostResult {
    int status = 0;
    std::string body;

    bool operator==(const RpcPostResult&) const = default;
};

const char* http_status_reason(int status);

// The full decapsulation pipeline for one POSTed call body:
// client check, reassemble, parse target, program policy, getport,
// forward, respond. Every outcome is an HTTP status plus body; nothing
// escapes as an exception.
RpcPostResult handle_rpc_post(std::span<const uint8_t> body,
                              const std::string& client_address,
                              const GatewayPolicy& policy,
                              const HostPort& portmapper,
                              const PortmapClientConfig& pmap_config = {});

// Resolves where a call must be forwarded. Throws
// GatewayError(not_registered) when getport returns the 0 sentinel and
// GatewayError(portmapper_unreachable) when the portmapper cannot answer.
HostPort resolve_backend(uint32_t prog, uint32_t vers, const HostPort& portmapper,
                         const std::string& backend_host,
                         const PortmapClientConfig& pmap_config = {});

// Writes the framed call verbatim, reads exactly one framed reply record
// (raw bytes, framing included), closes the backend connection. Throws
// GatewayError(connect_failure / backend_io / reply_oversize).
std::vector<uint8_t> forward_call(const HostPort& backend,
                                  std::span<const uint8_t> call_record_framed,
                                  size_t max_reply_bytes = kDefaultMaxRecord);

// HTTP(S) front end serving POST /rpc via handle_rpc_post.
class GatewayServer {
public:
    GatewayServer();
    ~GatewayServer();
    GatewayServer(const GatewayServer&) = delete;
    GatewayServer& operator=(const GatewayServer&) = delete;

    // Throws NetError(bind_failure) / ConfigError (unreadable TLS files).
    void start(const std::string& listen_host, uint16_t listen_port,
               const std::optional<TlsServerConfig>& tls, const GatewayPolicy& policy,
               const HostPort& portmapper);
    void stop();

    uint16_t port() const { return port_; }
    uint64_t posts_served() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    uint16_t port_ = 0;
};

// CGI mode: one request body on `in`, CGI response headers and the reply
// bytes on `out`. The web server has already stripped the HTTP headers.
// Returns the process exit status (0 even for protocol errors, which are
// reported in the Status line).
int run_cgi(std::istream& in, std::ostream& out, const GatewayPolicy& policy,
            const HostPort& portmapper, const std::string& client_address = "",
            const PortmapClientConfig& pmap_config = {});

}  // namespace rpctunnel
