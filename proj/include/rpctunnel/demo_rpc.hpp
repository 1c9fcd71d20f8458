#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rpctunnel/net.hpp"
#include "rpctunnel/portmap.hpp"
#include "rpctunnel/rpc_message.hpp"

namespace rpctunnel {

// Toy RPC program used to exercise the tunnel end to end. Program number
// from the user-assignable range; AUTH_NONE only.
namespace demo {
inline constexpr uint32_t kProgram = 300100;
inline constexpr uint32_t kVersion = 1;
inline constexpr uint32_t kProcNull = 0;
inline constexpr uint32_t kProcEcho = 1;  // opaque -> opaque
inline constexpr uint32_t kProcAdd = 2;   // (u32, u32) -> u32, wrapping
}  // namespace demo

// A reply that was parsed fine but did not carry an accepted SUCCESS.
class CallRejected : public std::runtime_error {
public:
    CallRejected(const ReplyStatus& status, const std::string& what)
        : std::runtime_error(what), status_(status) {}

    const ReplyStatus& status() const { return status_; }

private:
    ReplyStatus status_;
};

class DemoServer {
public:
    ~DemoServer() { stop(); }

    // Binds, then registers (300100, 1, tcp) -> port with the portmapper.
    // Throws NetError on bind/portmapper failure, TunnelError(registration)
    // when the SET is refused.
    void start(const HostPort& portmapper, const std::string& host = "127.0.0.1",
               uint16_t port = 0);
    void stop();  // unregisters

    uint16_t port() const { return server_.port(); }
    uint64_t connections_accepted() const { return server_.connections_accepted(); }

private:
    void serve_connection(TcpSocket& sock);
    RpcRecord handle_record(const RpcRecord& record);

    TcpServer server_;
    std::optional<HostPort> registered_with_;
};

// One RPC against target: builds the call (fresh xid unless given), sends
// it record-marked, returns the complete reply record. Transport errors
// propagate as NetError/ProtocolError.
RpcRecord demo_call_record(const HostPort& target, uint32_t proc,
                           std::span<const uint8_t> args,
                           std::optional<uint32_t> xid = std::nullopt,
                           uint32_t vers = demo::kVersion);

// Same, but unwraps the result bytes of an accepted SUCCESS reply.
// Throws CallRejected for every other reply status.
std::vector<uint8_t> demo_call(const HostPort& target, uint32_t proc,
                               std::span<const uint8_t> args,
                               std::optional<uint32_t> xid = std::nullopt,
                               uint32_t vers = demo::kVersion);

// Convenience wrappers over the three procedures.
std::vector<uint8_t> demo_echo(const HostPort& target, std::span<const uint8_t> payload);
uint32_t demo_add(const HostPort& target, uint32_t a, uint32_t b);
void demo_null(const HostPort& target);

uint32_t demo_fresh_xid();

}  // namespace rpctunnel
