#include "rpctunnel/portmap.hpp"

#include <random>

#include "rpctunnel/log.hpp"

namespace rpctunnel {

bool MappingRegistry::set(const PortMapping& mapping) {
    std::unique_lock lock(mutex_);
    Key key{mapping.prog, mapping.vers, mapping.proto};
    if (mappings_.count(key)) return false;
    mappings_[key] = mapping.port;
    return true;
}

bool MappingRegistry::unset(uint32_t prog, uint32_t vers) {
    std::unique_lock lock(mutex_);
    bool removed = false;
    for (auto it = mappings_.begin(); it != mappings_.end();) {
        if (std::get<0>(it->first) == prog && std::get<1>(it->first) == vers) {
            it = mappings_.erase(it);
            removed = true;
        } else {
            ++it;
        }
    }
    return removed;
}

uint32_t MappingRegistry::getport(uint32_t prog, uint32_t vers, uint32_t proto) const {
    std::shared_lock lock(mutex_);
    auto it = mappings_.find(Key{prog, vers, proto});
    return it == mappings_.end() ? 0 : it->second;
}

std::vector<PortMapping> MappingRegistry::snapshot() const {
    std::shared_lock lock(mutex_);
    std::vector<PortMapping> out;
    out.reserve(mappings_.size());
    for (const auto& [key, port] : mappings_)
        out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), port});
    return out;
}

namespace {

uint32_t fresh_xid() {
    static std::atomic<uint32_t> counter = [] {
        std::random_device rd;
        return rd();
    }();
    return counter.fetch_add(1);
}

std::vector<uint8_t> encode_mapping_args(uint32_t prog, uint32_t vers,
                                         uint32_t proto, uint32_t port) {
    XdrEncoder enc;
    enc.put_u32(prog);
    enc.put_u32(vers);
    enc.put_u32(proto);
    enc.put_u32(port);
    return enc.release();
}

// One call, one reply, connection closed. Returns the decoded u32 result
// of an accepted SUCCESS reply.
uint32_t pmap_call_u32(const HostPort& portmapper, uint32_t proc,
                       std::span<const uint8_t> args,
                       const PortmapClientConfig& config) {
    TcpSocket sock = TcpSocket::connect_to(portmapper.host, portmapper.port, config.timeout);
    sock.set_read_timeout(config.timeout);
    sock.set_write_timeout(config.timeout);

    uint32_t xid = fresh_xid();
    RpcRecord call = build_call(xid, pmap::kProgram, pmap::kVersion, proc,
                                OpaqueAuth::none(), OpaqueAuth::none(), args);
    sock.write_all(frame_record(call));

    SocketSource src(sock);
    std::optional<RpcRecord> reply;
    try {
        reply = reassemble_record(src);
    } catch (const ProtocolError& e) {
        throw ProtocolError(Errc::bad_reply, std::string("portmap: ") + e.what());
    }
    if (!reply)
        throw ProtocolError(Errc::bad_reply, "portmap: connection closed before reply");

    ReplyStatus status = parse_reply_status(*reply);
    if (status.xid != xid)
        throw ProtocolError(Errc::bad_reply, "portmap: reply xid mismatch");
    if (!status.accepted || status.accept_stat != AcceptStat::success)
        throw ProtocolError(Errc::bad_reply, "portmap: call not accepted");
    XdrDecoder dec(std::span(*reply).subspan(status.results_offset));
    return dec.get_u32();
}

}  // namespace

uint32_t pmap_getport(const HostPort& portmapper, uint32_t prog, uint32_t vers,
                      uint32_t proto, const PortmapClientConfig& config) {
    auto args = encode_mapping_args(prog, vers, proto, 0);
    uint32_t port = pmap_call_u32(portmapper, pmap::kProcGetport, args, config);
    if (port > 65535)
        throw ProtocolError(Errc::bad_reply,
                            "portmap: getport returned " + std::to_string(port));
    return port;
}

bool pmap_set(const HostPort& portmapper, const PortMapping& mapping,
              const PortmapClientConfig& config) {
    if (mapping.port == 0 || mapping.port > 65535)
        throw ProtocolError(Errc::bad_reply,
                            "portmap: refusing SET with port " + std::to_string(mapping.port));
    auto args = encode_mapping_args(mapping.prog, mapping.vers, mapping.proto, mapping.port);
    return pmap_call_u32(portmapper, pmap::kProcSet, args, config) != 0;
}

bool pmap_unset(const HostPort& portmapper, uint32_t prog, uint32_t vers,
                const PortmapClientConfig& config) {
    // Protocol quirk: UNSET still carries a full mapping; proto and port
    // are ignored by the server.
    auto args = encode_mapping_args(prog, vers, 0, 0);
    return pmap_call_u32(portmapper, pmap::kProcUnset, args, config) != 0;
}

void PortmapServer::start(const std::string& host, uint16_t port) {
    server_.start(host, port, [this](TcpSocket& sock) { serve_connection(sock); });
    registry_.set({pmap::kProgram, pmap::kVersion, pmap::kProtoTcp, server_.port()});
    RT_LOG_INFO("portmap: listening on %s:%u", host.c_str(), server_.port());
}

void PortmapServer::stop() { server_.stop(); }

void PortmapServer::serve_connection(TcpSocket& sock) {
    SocketSource src(sock);
    for (;;) {
        std::optional<RpcRecord> record;
        try {
            record = reassemble_record(src);
        } catch (const std::exception& e) {
            RT_LOG_DEBUG("portmap: dropping connection: %s", e.what());
            return;
        }
        if (!record) return;  // client done
        RpcRecord reply;
        try {
            reply = handle_record(*record);
        } catch (const ProtocolError& e) {
            RT_LOG_DEBUG("portmap: unparsable call: %s", e.what());
            return;
        }
        sock.write_all(frame_record(reply));
    }
}

RpcRecord PortmapServer::handle_record(const RpcRecord& record) {
    CallTarget target = parse_call_target(record);
    calls_served_.fetch_add(1);
    if (target.prog != pmap::kProgram)
        return build_reply_error(target.xid, AcceptStat::prog_unavail);
    if (target.vers != pmap::kVersion)
        return build_reply_prog_mismatch(target.xid, pmap::kVersion, pmap::kVersion);

    // SET/UNSET/GETPORT all carry a mapping struct as arguments.
    auto decode_mapping = [&](PortMapping& mapping) {
        XdrDecoder dec(std::span(record).subspan(call_args_offset(record)));
        mapping.prog = dec.get_u32();
        mapping.vers = dec.get_u32();
        mapping.proto = dec.get_u32();
        mapping.port = dec.get_u32();
    };

    XdrEncoder result;
    PortMapping mapping;
    switch (target.proc) {
    case pmap::kProcNull:
        break;
    case pmap::kProcSet:
        try {
            decode_mapping(mapping);
        } catch (const ProtocolError&) {
            return build_reply_error(target.xid, AcceptStat::garbage_args);
        }
        if (mapping.port == 0 || mapping.port > 65535)
            result.put_u32(0);
        else
            result.put_u32(registry_.set(mapping) ? 1 : 0);
        break;
    case pmap::kProcUnset:
        try {
            decode_mapping(mapping);
        } catch (const ProtocolError&) {
            return build_reply_error(target.xid, AcceptStat::garbage_args);
        }
        result.put_u32(registry_.unset(mapping.prog, mapping.vers) ? 1 : 0);
        break;
    case pmap::kProcGetport:
        try {
            decode_mapping(mapping);
        } catch (const ProtocolError&) {
            return build_reply_error(target.xid, AcceptStat::garbage_args);
        }
        // The request's port field is present but unused.
        result.put_u32(registry_.getport(mapping.prog, mapping.vers, mapping.proto));
        break;
    default:
        return build_reply_error(target.xid, AcceptStat::proc_unavail);
    }
    return build_reply_success(target.xid, result.bytes());
}

}  // namespace rpctunnel
