#include "rpctunnel/demo_rpc.hpp"

#include <atomic>
#include <random>

#include "rpctunnel/log.hpp"

namespace rpctunnel {

uint32_t demo_fresh_xid() {
    static std::atomic<uint32_t> counter = [] {
        std::random_device rd;
        return rd();
    }();
    return counter.fetch_add(1);
}

void DemoServer::start(const HostPort& portmapper, const std::string& host, uint16_t port) {
    server_.start(host, port, [this](TcpSocket& sock) { serve_connection(sock); });
    PortMapping mapping{demo::kProgram, demo::kVersion, pmap::kProtoTcp, server_.port()};
    bool ok;
    try {
        ok = pmap_set(portmapper, mapping);
    } catch (...) {
        server_.stop();
        throw;
    }
    if (!ok) {
        server_.stop();
        throw TunnelError(TunnelError::Kind::registration,
                          "demo-server: portmapper refused SET for " +
                              std::to_string(demo::kProgram));
    }
    registered_with_ = portmapper;
    RT_LOG_INFO("demo-server: prog %u vers %u on port %u", demo::kProgram,
                demo::kVersion, server_.port());
}

void DemoServer::stop() {
    if (registered_with_) {
        try {
            pmap_unset(*registered_with_, demo::kProgram, demo::kVersion);
        } catch (const std::exception& e) {
            RT_LOG_INFO("demo-server: unset failed: %s", e.what());
        }
        registered_with_.reset();
    }
    server_.stop();
}

void DemoServer::serve_connection(TcpSocket& sock) {
    SocketSource src(sock);
    for (;;) {
        std::optional<RpcRecord> record;
        try {
            record = reassemble_record(src);
        } catch (const std::exception& e) {
            RT_LOG_DEBUG("demo-server: dropping connection: %s", e.what());
            return;
        }
        if (!record) return;
        RpcRecord reply;
        try {
            reply = handle_record(*record);
        } catch (const ProtocolError& e) {
            RT_LOG_DEBUG("demo-server: unparsable call: %s", e.what());
            return;
        }
        sock.write_all(frame_record(reply));
    }
}

RpcRecord DemoServer::handle_record(const RpcRecord& record) {
    CallTarget target = parse_call_target(record);
    if (target.prog != demo::kProgram)
        return build_reply_error(target.xid, AcceptStat::prog_unavail);
    if (target.vers != demo::kVersion)
        return build_reply_prog_mismatch(target.xid, demo::kVersion, demo::kVersion);

    std::span<const uint8_t> args = std::span(record).subspan(call_args_offset(record));
    XdrEncoder result;
    switch (target.proc) {
    case demo::kProcNull:
        break;
    case demo::kProcEcho:
        try {
            XdrDecoder dec(args);
            result.put_opaque(dec.get_opaque());
        } catch (const ProtocolError&) {
            return build_reply_error(target.xid, AcceptStat::garbage_args);
        }
        break;
    case demo::kProcAdd:
        try {
            XdrDecoder dec(args);
            uint32_t a = dec.get_u32();
            uint32_t b = dec.get_u32();
            result.put_u32(a + b);  // wraps mod 2^32
        } catch (const ProtocolError&) {
            return build_reply_error(target.xid, AcceptStat::garbage_args);
        }
        break;
    default:
        return build_reply_error(target.xid, AcceptStat::proc_unavail);
    }
    return build_reply_success(target.xid, result.bytes());
}

RpcRecord demo_call_record(const HostPort& target, uint32_t proc,
                           std::span<const uint8_t> args,
                           std::optional<uint32_t> xid, uint32_t vers) {
    uint32_t call_xid = xid.value_or(demo_fresh_xid());
    RpcRecord call = build_call(call_xid, demo::kProgram, vers, proc,
                                OpaqueAuth::none(), OpaqueAuth::none(), args);
    TcpSocket sock = TcpSocket::connect_to(target.host, target.port);
    sock.set_read_timeout(std::chrono::milliseconds(10000));
    sock.write_all(frame_record(call));

    SocketSource src(sock);
    auto reply = reassemble_record(src);
    if (!reply)
        throw ProtocolError(Errc::bad_reply, "demo: connection closed before reply");
    ReplyStatus status = parse_reply_status(*reply);
    if (status.xid != call_xid)
        throw ProtocolError(Errc::bad_reply, "demo: reply xid mismatch");
    return std::move(*reply);
}

std::vector<uint8_t> demo_call(const HostPort& target, uint32_t proc,
                               std::span<const uint8_t> args,
                               std::optional<uint32_t> xid, uint32_t vers) {
    RpcRecord reply = demo_call_record(target, proc, args, xid, vers);
    ReplyStatus status = parse_reply_status(reply);
    if (!status.accepted)
        throw CallRejected(status, "demo: call denied");
    if (status.accept_stat != AcceptStat::success)
        throw CallRejected(status, "demo: accept_stat " +
                                       std::to_string(static_cast<uint32_t>(status.accept_stat)));
    return {reply.begin() + static_cast<ptrdiff_t>(status.results_offset), reply.end()};
}

std::vector<uint8_t> demo_echo(const HostPort& target, std::span<const uint8_t> payload) {
    XdrEncoder args;
    args.put_opaque(payload);
    auto result = demo_call(target, demo::kProcEcho, args.bytes());
    XdrDecoder dec(result);
    return dec.get_opaque();
}

uint32_t demo_add(const HostPort& target, uint32_t a, uint32_t b) {
    XdrEncoder args;
    args.put_u32(a);
    args.put_u32(b);
    auto result = demo_call(target, demo::kProcAdd, args.bytes());
    XdrDecoder dec(result);
    return dec.get_u32();
}

void demo_null(const HostPort& target) {
    demo_call(target, demo::kProcNull, {});
}

}  // namespace rpctunnel
