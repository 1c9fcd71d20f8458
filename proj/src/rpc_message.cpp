#include "rpctunnel/rpc_message.hpp"

namespace rpctunnel {

namespace {

void put_auth(XdrEncoder& enc, const OpaqueAuth& auth) {
    if (auth.body.size() > kMaxAuthBody)
        throw ProtocolError(Errc::auth_too_long,
                            "rpc: auth body " + std::to_string(auth.body.size()) +
                                " bytes exceeds the 400-byte limit");
    enc.put_u32(auth.flavor);
    enc.put_opaque(auth.body);
}

OpaqueAuth get_auth(XdrDecoder& dec) {
    OpaqueAuth auth;
    auth.flavor = dec.get_u32();
    auth.body = dec.get_opaque();
    if (auth.body.size() > kMaxAuthBody)
        throw ProtocolError(Errc::auth_too_long,
                            "rpc: auth body over the 400-byte limit");
    return auth;
}

}  // namespace

RpcRecord build_call(uint32_t xid, uint32_t prog, uint32_t vers, uint32_t proc,
                     const OpaqueAuth& cred, const OpaqueAuth& verf,
                     std::span<const uint8_t> args) {
    XdrEncoder enc;
    enc.put_u32(xid);
    enc.put_u32(kMsgTypeCall);
    enc.put_u32(kRpcVersion);
    enc.put_u32(prog);
    enc.put_u32(vers);
    enc.put_u32(proc);
    put_auth(enc, cred);
    put_auth(enc, verf);
    enc.put_raw(args);
    return enc.release();
}

RpcRecord build_reply_success(uint32_t xid, std::span<const uint8_t> results) {
    XdrEncoder enc;
    enc.put_u32(xid);
    enc.put_u32(kMsgTypeReply);
    enc.put_u32(0);  // MSG_ACCEPTED
    put_auth(enc, OpaqueAuth::none());
    enc.put_u32(static_cast<uint32_t>(AcceptStat::success));
    enc.put_raw(results);
    return enc.release();
}

RpcRecord build_reply_error(uint32_t xid, AcceptStat stat) {
    XdrEncoder enc;
    enc.put_u32(xid);
    enc.put_u32(kMsgTypeReply);
    enc.put_u32(0);  // MSG_ACCEPTED
    put_auth(enc, OpaqueAuth::none());
    enc.put_u32(static_cast<uint32_t>(stat));
    return enc.release();
}

RpcRecord build_reply_prog_mismatch(uint32_t xid, uint32_t low, uint32_t high) {
    XdrEncoder enc;
    enc.put_u32(xid);
    enc.put_u32(kMsgTypeReply);
    enc.put_u32(0);  // MSG_ACCEPTED
    put_auth(enc, OpaqueAuth::none());
    enc.put_u32(static_cast<uint32_t>(AcceptStat::prog_mismatch));
    enc.put_u32(low);
    enc.put_u32(high);
    return enc.release();
}

RpcRecord build_reply_denied_rpc_mismatch(uint32_t xid, uint32_t low, uint32_t high) {
    XdrEncoder enc;
    enc.put_u32(xid);
    enc.put_u32(kMsgTypeReply);
    enc.put_u32(1);  // MSG_DENIED
    enc.put_u32(static_cast<uint32_t>(RejectStat::rpc_mismatch));
    enc.put_u32(low);
    enc.put_u32(high);
    return enc.release();
}

CallTarget parse_call_target(std::span<const uint8_t> record) {
    XdrDecoder dec(record);
    CallTarget target;
    target.xid = dec.get_u32();
    uint32_t msg_type = dec.get_u32();
    if (msg_type != kMsgTypeCall)
        throw ProtocolError(Errc::not_a_call,
                            "rpc: msg_type " + std::to_string(msg_type) + " is not CALL");
    uint32_t rpcvers = dec.get_u32();
    if (rpcvers != kRpcVersion)
        throw ProtocolError(Errc::bad_rpc_version,
                            "rpc: rpcvers " + std::to_string(rpcvers) + ", expected 2");
    target.prog = dec.get_u32();
    target.vers = dec.get_u32();
    target.proc = dec.get_u32();
    return target;
}

ReplyStatus parse_reply_status(std::span<const uint8_t> record) {
    XdrDecoder dec(record);
    ReplyStatus status;
    status.xid = dec.get_u32();
    uint32_t msg_type = dec.get_u32();
    if (msg_type != kMsgTypeReply)
        throw ProtocolError(Errc::not_a_reply,
                            "rpc: msg_type " + std::to_string(msg_type) + " is not REPLY");
    uint32_t reply_stat = dec.get_u32();
    if (reply_stat == 0) {
        status.accepted = true;
        status.verf = get_auth(dec);
        uint32_t stat = dec.get_u32();
        if (stat > static_cast<uint32_t>(AcceptStat::system_err))
            throw ProtocolError(Errc::bad_reply,
                                "rpc: unknown accept_stat " + std::to_string(stat));
        status.accept_stat = static_cast<AcceptStat>(stat);
        if (status.accept_stat == AcceptStat::prog_mismatch) {
            status.mismatch_low = dec.get_u32();
            status.mismatch_high = dec.get_u32();
        }
        status.results_offset = dec.offset();
    } else if (reply_stat == 1) {
        status.accepted = false;
        uint32_t stat = dec.get_u32();
        if (stat == static_cast<uint32_t>(RejectStat::rpc_mismatch)) {
            status.reject_stat = RejectStat::rpc_mismatch;
            status.mismatch_low = dec.get_u32();
            status.mismatch_high = dec.get_u32();
        } else if (stat == static_cast<uint32_t>(RejectStat::auth_error)) {
            status.reject_stat = RejectStat::auth_error;
            status.auth_stat = dec.get_u32();
        } else {
            throw ProtocolError(Errc::bad_reply,
                                "rpc: unknown reject_stat " + std::to_string(stat));
        }
        status.results_offset = dec.offset();
    } else {
        throw ProtocolError(Errc::bad_reply,
                            "rpc: unknown reply_stat " + std::to_string(reply_stat));
    }
    return status;
}

size_t call_args_offset(std::span<const uint8_t> record) {
    XdrDecoder dec(record);
    dec.skip(24);  // xid, msg_type, rpcvers, prog, vers, proc
    get_auth(dec);
    get_auth(dec);
    return dec.offset();
}

std::vector<uint8_t> frame_record(std::span<const uint8_t> record, size_t max_fragment) {
    if (max_fragment == 0 || max_fragment > kMaxFragmentLen)
        max_fragment = kMaxFragmentLen;
    std::vector<uint8_t> out;
    out.reserve(record.size() + 4 * (record.size() / max_fragment + 1));
    size_t offset = 0;
    do {
        size_t len = record.size() - offset;
        if (len > max_fragment) len = max_fragment;
        bool last = offset + len == record.size();
        uint32_t header = static_cast<uint32_t>(len) | (last ? kLastFragmentFlag : 0);
        out.push_back(static_cast<uint8_t>(header >> 24));
        out.push_back(static_cast<uint8_t>(header >> 16));
        out.push_back(static_cast<uint8_t>(header >> 8));
        out.push_back(static_cast<uint8_t>(header));
        out.insert(out.end(), record.begin() + offset, record.begin() + offset + len);
        offset += len;
    } while (offset < record.size());
    return out;
}

size_t MemorySource::read_some(uint8_t* dst, size_t n) {
    size_t avail = data_.size() - offset_;
    if (n > avail) n = avail;
    std::copy(data_.begin() + offset_, data_.begin() + offset_ + n, dst);
    offset_ += n;
    return n;
}

namespace {

// Fills the buffer exactly or reports how it ended: true = filled,
// false = end of stream before the first byte. A partial read followed
// by end of stream is a truncation error.
bool read_exact_or_eof(ByteSource& src, uint8_t* dst, size_t n) {
    size_t got = 0;
    while (got < n) {
        size_t r = src.read_some(dst + got, n - got);
        if (r == 0) {
            if (got == 0) return false;
            throw ProtocolError(Errc::truncated,
                                "record: stream ended mid-fragment");
        }
        got += r;
    }
    return true;
}

std::optional<FramedRecord> reassemble_impl(ByteSource& src, size_t max_record,
                                            bool capture) {
    FramedRecord rec;
    bool first = true;
    for (;;) {
        uint8_t hdr[4];
        if (!read_exact_or_eof(src, hdr, 4)) {
            if (first) return std::nullopt;  // clean EOF at a record boundary
            throw ProtocolError(Errc::truncated,
                                "record: stream ended before the last fragment");
        }
        uint32_t word = (static_cast<uint32_t>(hdr[0]) << 24) |
                        (static_cast<uint32_t>(hdr[1]) << 16) |
                        (static_cast<uint32_t>(hdr[2]) << 8) |
                        static_cast<uint32_t>(hdr[3]);
        bool last = (word & kLastFragmentFlag) != 0;
        size_t len = word & kMaxFragmentLen;
        if (len == 0 && !last)
            throw ProtocolError(Errc::bad_framing,
                                "record: zero-length non-last fragment");
        if (rec.payload.size() + len > max_record)
            throw ProtocolError(Errc::oversize_record,
                                "record: size exceeds cap " + std::to_string(max_record));
        if (capture) rec.raw.insert(rec.raw.end(), hdr, hdr + 4);
        size_t old_size = rec.payload.size();
        rec.payload.resize(old_size + len);
        if (len > 0 && !read_exact_or_eof(src, rec.payload.data() + old_size, len))
            throw ProtocolError(Errc::truncated,
                                "record: stream ended mid-fragment");
        if (capture)
            rec.raw.insert(rec.raw.end(), rec.payload.begin() + old_size, rec.payload.end());
        first = false;
        if (last) return rec;
    }
}

}  // namespace

std::optional<RpcRecord> reassemble_record(ByteSource& src, size_t max_record) {
    auto rec = reassemble_impl(src, max_record, false);
    if (!rec) return std::nullopt;
    return std::move(rec->payload);
}

std::optional<FramedRecord> reassemble_record_capture(ByteSource& src, size_t max_record) {
    return reassemble_impl(src, max_record, true);
}

}  // namespace rpctunnel
