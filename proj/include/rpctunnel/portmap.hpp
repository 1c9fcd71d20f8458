#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <shared_mutex>
#include <tuple>
#include <vector>

#include "rpctunnel/net.hpp"
#include "rpctunnel/rpc_message.hpp"

namespace rpctunnel {

// Portmapper v2 protocol (RFC 1833; wire behavior per RFC 1050).
namespace pmap {
inline constexpr uint32_t kProgram = 100000;
inline constexpr uint32_t kVersion = 2;
inline constexpr uint32_t kProcNull = 0;
inline constexpr uint32_t kProcSet = 1;
inline constexpr uint32_t kProcUnset = 2;
inline constexpr uint32_t kProcGetport = 3;
inline constexpr uint32_t kProcDump = 4;
inline constexpr uint32_t kProcCallit = 5;
inline constexpr uint32_t kProtoTcp = 6;
inline constexpr uint32_t kProtoUdp = 17;
}  // namespace pmap

struct PortMapping {
    uint32_t prog = 0;
    uint32_t vers = 0;
    uint32_t proto = pmap::kProtoTcp;
    uint32_t port = 0;

    bool operator==(const PortMapping&) const = default;
};

// (prog, vers, proto) -> port map. SET refuses to overwrite an existing
// key; UNSET drops every protocol's entry for (prog, vers).
class MappingRegistry {
public:
    bool set(const PortMapping& mapping);
    bool unset(uint32_t prog, uint32_t vers);
    uint32_t getport(uint32_t prog, uint32_t vers, uint32_t proto) const;
    std::vector<PortMapping> snapshot() const;

private:
    using Key = std::tuple<uint32_t, uint32_t, uint32_t>;
    mutable std::shared_mutex mutex_;
    std::map<Key, uint32_t> mappings_;
};

struct PortmapClientConfig {
    std::chrono::milliseconds timeout{5000};
};

// Client operations against any portmapper speaking v2 over TCP.
// Throw NetError when the portmapper is unreachable and
// ProtocolError(bad_reply) on malformed or unexpected replies.
uint32_t pmap_getport(const HostPort& portmapper, uint32_t prog, uint32_t vers,
                      uint32_t proto, const PortmapClientConfig& config = {});
bool pmap_set(const HostPort& portmapper, const PortMapping& mapping,
              const PortmapClientConfig& config = {});
bool pmap_unset(const HostPort& portmapper, uint32_t prog, uint32_t vers,
                const PortmapClientConfig& config = {});

// Embedded portmapper: NULL/SET/UNSET/GETPORT over TCP with record
// marking; DUMP and CALLIT answer PROC_UNAVAIL. Registers itself as
// (100000, 2, tcp) -> listen port on startup.
class PortmapServer {
public:
    ~PortmapServer() { stop(); }

    void start(const std::string& host = "127.0.0.1", uint16_t port = 0);
    void stop();

    uint16_t port() const { return server_.port(); }
    MappingRegistry& registry() { return registry_; }

    // Total RPC records answered; lets tests assert that no portmapper
    // traffic happened on a denied path.
    uint64_t calls_served() const { return calls_served_.load(); }

private:
    void serve_connection(TcpSocket& sock);
    RpcRecord handle_record(const RpcRecord& record);

    TcpServer server_;
    MappingRegistry registry_;
    std::atomic<uint64_t> calls_served_{0};
};

}  // namespace rpctunnel
