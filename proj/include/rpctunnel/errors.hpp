#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rpctunnel {

// Wire-level decode/encode failures shared by the XDR and RPC layers.
enum class Errc {
    truncated,        // fewer bytes than the structure requires
    oversize_field,   // variable-length field exceeds the configured cap
    oversize_record,  // reassembled record exceeds the configured cap
    bad_framing,      // record-marking violation (e.g. empty non-last fragment)
    not_a_call,       // msg_type != CALL
    not_a_reply,      // msg_type != REPLY
    bad_rpc_version,  // rpcvers != 2
    auth_too_long,    // opaque_auth body over the 400-byte RFC limit
    bad_reply,        // peer reply does not match the protocol
};

const char* errc_name(Errc code);

class ProtocolError : public std::runtime_error {
public:
    ProtocolError(Errc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

// Socket-layer failures.
class NetError : public std::runtime_error {
public:
    enum class Kind {
        resolve,
        connect_failure,
        bind_failure,
        timeout,
        io,
        closed,
    };

    NetError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Failures raised on the client side of the HTTP tunnel.
class TunnelError : public std::runtime_error {
public:
    enum class Kind {
        registration,       // portmapper SET refused
        gateway_unreachable,
        gateway_http,       // non-200 response, see http_status()
        tls_verification,
        xid_mismatch,
        bad_config,
    };

    TunnelError(Kind kind, const std::string& what, int http_status = 0)
        : std::runtime_error(what), kind_(kind), http_status_(http_status) {}

    Kind kind() const { return kind_; }
    int http_status() const { return http_status_; }

private:
    Kind kind_;
    int http_status_;
};

// Failures in the gateway's backend pipeline; handle_rpc_post maps these
// onto HTTP statuses.
class GatewayError : public std::runtime_error {
public:
    enum class Kind {
        not_registered,          // getport returned 0
        portmapper_unreachable,
        connect_failure,
        backend_io,
        reply_oversize,
    };

    GatewayError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0)
        : std::runtime_error(what), line_(line) {}

    int line() const { return line_; }

private:
    int line_;
};

// Bad command-line invocation; what() carries the synopsis to print.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rpctunnel
