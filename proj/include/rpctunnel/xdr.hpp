#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rpctunnel/errors.hpp"

namespace rpctunnel {

// Default cap on a variable-length opaque accepted by the decoder. The
// length field is attacker-controlled on the wire, so it must be bounded.
inline constexpr size_t kDefaultMaxOpaque = 1u << 20;

// XDR encoder: big-endian, every item padded to a 4-byte boundary
// (RFC 1832). Only the primitives the RPC headers and the portmapper
// protocol need.
class XdrEncoder {
public:
    void put_u32(uint32_t v);

    // 4-byte length header + data + zero padding to a 4-byte boundary.
    void put_opaque(std::span<const uint8_t> data);

    // Raw bytes, no header, no padding. Used to append pre-encoded args.
    void put_raw(std::span<const uint8_t> data);

    const std::vector<uint8_t>& bytes() const { return buf_; }
    std::vector<uint8_t> release() { return std::move(buf_); }
    size_t size() const { return buf_.size(); }

private:
    std::vector<uint8_t> buf_;
};

// XDR decoder over a borrowed buffer. The cursor stays 4-byte aligned
// after every complete decode. Throws ProtocolError on underflow
// (Errc::truncated) and on a length field over the cap
// (Errc::oversize_field). Padding bytes are not validated on read.
class XdrDecoder {
public:
    XdrDecoder(std::span<const uint8_t> buffer, size_t max_opaque = kDefaultMaxOpaque)
        : buf_(buffer), max_opaque_(max_opaque) {}

    uint32_t get_u32();
    std::vector<uint8_t> get_opaque();

    // Remaining bytes, verbatim; cursor moves to the end.
    std::vector<uint8_t> get_remaining();

    void skip(size_t n);

    size_t offset() const { return offset_; }
    size_t remaining() const { return buf_.size() - offset_; }
    bool exhausted() const { return offset_ == buf_.size(); }

private:
    void require(size_t n) const;

    std::span<const uint8_t> buf_;
    size_t max_opaque_;
    size_t offset_ = 0;
};

// Bytes of padding needed to bring n up to a 4-byte boundary.
inline size_t xdr_pad(size_t n) { return (4 - n % 4) % 4; }

}  // namespace rpctunnel
