#include "rpctunnel/xdr.hpp"

namespace rpctunnel {

const char* errc_name(Errc code) {
    switch (code) {
    case Errc::truncated: return "truncated";
    case Errc::oversize_field: return "oversize field";
    case Errc::oversize_record: return "oversize record";
    case Errc::bad_framing: return "bad framing";
    case Errc::not_a_call: return "not a call";
    case Errc::not_a_reply: return "not a reply";
    case Errc::bad_rpc_version: return "bad rpc version";
    case Errc::auth_too_long: return "auth too long";
    case Errc::bad_reply: return "bad reply";
    }
    return "unknown";
}

void XdrEncoder::put_u32(uint32_t v) {
    buf_.push_back(static_cast<uint8_t>(v >> 24));
    buf_.push_back(static_cast<uint8_t>(v >> 16));
    buf_.push_back(static_cast<uint8_t>(v >> 8));
    buf_.push_back(static_cast<uint8_t>(v));
}

void XdrEncoder::put_opaque(std::span<const uint8_t> data) {
    put_u32(static_cast<uint32_t>(data.size()));
    put_raw(data);
    buf_.insert(buf_.end(), xdr_pad(data.size()), 0);
}

void XdrEncoder::put_raw(std::span<const uint8_t> data) {
    buf_.insert(buf_.end(), data.begin(), data.end());
}

void XdrDecoder::require(size_t n) const {
    if (buf_.size() - offset_ < n)
        throw ProtocolError(Errc::truncated,
                            "xdr: need " + std::to_string(n) + " bytes, have " +
                                std::to_string(buf_.size() - offset_));
}

uint32_t XdrDecoder::get_u32() {
    require(4);
    uint32_t v = (static_cast<uint32_t>(buf_[offset_]) << 24) |
                 (static_cast<uint32_t>(buf_[offset_ + 1]) << 16) |
                 (static_cast<uint32_t>(buf_[offset_ + 2]) << 8) |
                 static_cast<uint32_t>(buf_[offset_ + 3]);
    offset_ += 4;
    return v;
}

std::vector<uint8_t> XdrDecoder::get_opaque() {
    uint32_t len = get_u32();
    if (len > max_opaque_)
        throw ProtocolError(Errc::oversize_field,
                            "xdr: opaque length " + std::to_string(len) +
                                " exceeds cap " + std::to_string(max_opaque_));
    require(len + xdr_pad(len));
    std::vector<uint8_t> out(buf_.begin() + offset_, buf_.begin() + offset_ + len);
    offset_ += len + xdr_pad(len);
    return out;
}

std::vector<uint8_t> XdrDecoder::get_remaining() {
    std::vector<uint8_t> out(buf_.begin() + offset_, buf_.end());
    offset_ = buf_.size();
    return out;
}

void XdrDecoder::skip(size_t n) {
    require(n);
    offset_ += n;
}

}  // namespace rpctunnel
