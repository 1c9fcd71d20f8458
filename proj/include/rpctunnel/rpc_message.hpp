#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rpctunnel/errors.hpp"
#include "rpctunnel/xdr.hpp"

namespace rpctunnel {

// ONC RPC v2 message constants (RFC 1831).
inline constexpr uint32_t kMsgTypeCall = 0;
inline constexpr uint32_t kMsgTypeReply = 1;
inline constexpr uint32_t kRpcVersion = 2;
inline constexpr uint32_t kAuthNone = 0;
inline constexpr size_t kMaxAuthBody = 400;

enum class AcceptStat : uint32_t {
    success = 0,
    prog_unavail = 1,
    prog_mismatch = 2,
    proc_unavail = 3,
    garbage_args = 4,
    system_err = 5,
};

enum class RejectStat : uint32_t {
    rpc_mismatch = 0,
    auth_error = 1,
};

struct OpaqueAuth {
    uint32_t flavor = kAuthNone;
    std::vector<uint8_t> body;

    static OpaqueAuth none() { return {}; }
};

// A complete RPC message (headers + parameters), record framing stripped.
using RpcRecord = std::vector<uint8_t>;

struct CallTarget {
    uint32_t xid = 0;
    uint32_t prog = 0;
    uint32_t vers = 0;
    uint32_t proc = 0;
};

struct ReplyStatus {
    uint32_t xid = 0;
    bool accepted = false;
    AcceptStat accept_stat = AcceptStat::success;  // valid when accepted
    RejectStat reject_stat = RejectStat::rpc_mismatch;  // valid when denied
    uint32_t mismatch_low = 0;   // prog_mismatch / rpc_mismatch detail
    uint32_t mismatch_high = 0;
    uint32_t auth_stat = 0;      // auth_error detail
    OpaqueAuth verf;             // accepted case
    size_t results_offset = 0;   // byte offset of result data within the record
};

// Serializes a call message: xid, CALL, rpcvers=2, prog, vers, proc,
// cred, verf, then args verbatim. Throws ProtocolError(auth_too_long)
// when an auth body exceeds 400 bytes.
RpcRecord build_call(uint32_t xid, uint32_t prog, uint32_t vers, uint32_t proc,
                     const OpaqueAuth& cred, const OpaqueAuth& verf,
                     std::span<const uint8_t> args);

// Reply builders used by the embedded servers.
RpcRecord build_reply_success(uint32_t xid, std::span<const uint8_t> results);
RpcRecord build_reply_error(uint32_t xid, AcceptStat stat);
RpcRecord build_reply_prog_mismatch(uint32_t xid, uint32_t low, uint32_t high);
RpcRecord build_reply_denied_rpc_mismatch(uint32_t xid, uint32_t low, uint32_t high);

// Pulls (xid, prog, vers, proc) out of a call record without touching the
// arguments. Throws not_a_call / bad_rpc_version / truncated.
CallTarget parse_call_target(std::span<const uint8_t> record);

// Decodes the reply status hierarchy. Throws not_a_reply / truncated /
// bad_reply (unknown status codes).
ReplyStatus parse_reply_status(std::span<const uint8_t> record);

// Offset of the argument bytes within a call record, past both auths.
size_t call_args_offset(std::span<const uint8_t> record);

// --- TCP record marking (RFC 1831 §10) ---

// Fragment header: top bit = last fragment, low 31 bits = length.
inline constexpr uint32_t kLastFragmentFlag = 0x80000000u;
inline constexpr uint32_t kMaxFragmentLen = 0x7fffffffu;

// Cap on a reassembled record. The sender controls the length fields, so
// reassembly must be bounded.
inline constexpr size_t kDefaultMaxRecord = 1u << 20;

// Splits a record into fragments of at most max_fragment bytes, each with
// its marking header, last one flagged. The default emits a single
// last-flagged fragment. An empty record becomes a zero-length last fragment.
std::vector<uint8_t> frame_record(std::span<const uint8_t> record,
                                  size_t max_fragment = kMaxFragmentLen);

// Ordered byte source for reassembly. read_some returns 0 on end of stream.
class ByteSource {
public:
    virtual ~ByteSource() = default;
    virtual size_t read_some(uint8_t* dst, size_t n) = 0;
};

class MemorySource : public ByteSource {
public:
    explicit MemorySource(std::span<const uint8_t> data) : data_(data) {}

    size_t read_some(uint8_t* dst, size_t n) override;
    size_t consumed() const { return offset_; }
    bool exhausted() const { return offset_ == data_.size(); }

private:
    std::span<const uint8_t> data_;
    size_t offset_ = 0;
};

// One reassembled record plus the exact framed bytes it arrived in.
struct FramedRecord {
    RpcRecord payload;
    std::vector<uint8_t> raw;
};

// Reads fragments up to and including the first last-flagged one and
// returns the concatenated payloads. Consumes nothing beyond the record.
// Returns nullopt on a clean end of stream at a record boundary; throws
// ProtocolError(truncated) when the stream ends mid-fragment and
// ProtocolError(oversize_record) when the cumulative payload exceeds the cap.
std::optional<RpcRecord> reassemble_record(ByteSource& src,
                                           size_t max_record = kDefaultMaxRecord);

// Same, also capturing the raw framed byte sequence for verbatim forwarding.
std::optional<FramedRecord> reassemble_record_capture(ByteSource& src,
                                                      size_t max_record = kDefaultMaxRecord);

}  // namespace rpctunnel
