#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rpctunnel/net.hpp"
#include "rpctunnel/portmap.hpp"
#include "rpctunnel/rpc_message.hpp"

namespace rpctunnel {

struct ParsedUrl {
    std::string scheme;
    std::string host;
    uint16_t port = 0;
    std::string path;  // "/" when absent

    static ParsedUrl parse(const std::string& url);  // throws ConfigError
};

struct TunnelEndpointConfig {
    std::string gateway_url;     // http(s)://host[:port][/path], path defaults to /rpc
    std::string server_address;  // forwarded to the gateway as X-RPC-Server
    uint32_t prog = 0;
    std::vector<uint32_t> versions;
    HostPort portmapper;
    std::string listen_host = "127.0.0.1";
    uint16_t listen_port = 0;  // 0 = ephemeral
    std::string ca_file;       // empty = system trust anchors
    bool insecure_skip_verify = false;  // also unlocks plain-http gateway URLs
    std::chrono::milliseconds http_timeout{10000};
};

// One local connection's HTTP leg: a persistent keep-alive connection to
// the gateway, one POST per RPC call.
class TunnelHttpSession {
public:
    explicit TunnelHttpSession(const TunnelEndpointConfig& config);
    ~TunnelHttpSession();
    TunnelHttpSession(const TunnelHttpSession&) = delete;
    TunnelHttpSession& operator=(const TunnelHttpSession&) = delete;

    // POSTs the record-marked call, returns the HTTP response body (the
    // record-marked reply, verbatim). Throws TunnelError; expect_xid
    // guards the xid-conservation invariant.
    std::vector<uint8_t> tunnel_call(std::span<const uint8_t> framed_call,
                                     uint32_t expect_xid);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// The client-side filter: registers (prog, vers) -> local port with the
// portmapper, accepts local RPC-over-TCP connections, and completes each
// call through the gateway.
class RpcFilter {
public:
    ~RpcFilter() { stop(); }

    // Throws TunnelError(bad_config) for a plain-http gateway without the
    // insecure flag, NetError(bind_failure), TunnelError(registration)
    // when a portmapper SET is refused (already-made registrations are
    // rolled back).
    void start(const TunnelEndpointConfig& config);
    void stop();  // unregisters every mapping this filter set

    uint16_t port() const { return server_.port(); }
    uint64_t sessions_served() const { return server_.connections_accepted(); }
    uint64_t calls_tunneled() const { return calls_.load(); }

private:
    void serve_session(TcpSocket& sock);

    TunnelEndpointConfig config_;
    TcpServer server_;
    std::vector<uint32_t> registered_versions_;
    std::atomic<uint64_t> calls_{0};
};

}  // namespace rpctunnel
