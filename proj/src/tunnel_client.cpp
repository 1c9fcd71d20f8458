#include "rpctunnel/tunnel_client.hpp"

#include "rpctunnel/http.hpp"
#include "rpctunnel/log.hpp"

namespace rpctunnel {

ParsedUrl ParsedUrl::parse(const std::string& url) {
    ParsedUrl out;
    size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("url '" + url + "' has no scheme");
    out.scheme = url.substr(0, scheme_end);
    if (out.scheme != "http" && out.scheme != "https")
        throw ConfigError("unsupported url scheme '" + out.scheme + "'");

    size_t authority_start = scheme_end + 3;
    size_t path_start = url.find('/', authority_start);
    std::string authority = url.substr(
        authority_start,
        path_start == std::string::npos ? std::string::npos : path_start - authority_start);
    out.path = path_start == std::string::npos ? "/" : url.substr(path_start);

    size_t colon = authority.rfind(':');
    if (colon == std::string::npos) {
        out.host = authority;
        out.port = out.scheme == "https" ? 443 : 80;
    } else {
        out.host = authority.substr(0, colon);
        try {
            size_t idx = 0;
            unsigned long port = std::stoul(authority.substr(colon + 1), &idx);
            if (idx != authority.size() - colon - 1 || port == 0 || port > 65535)
                throw std::invalid_argument("");
            out.port = static_cast<uint16_t>(port);
        } catch (const std::exception&) {
            throw ConfigError("bad port in url '" + url + "'");
        }
    }
    if (out.host.empty()) throw ConfigError("url '" + url + "' has no host");
    return out;
}

struct TunnelHttpSession::Impl {
    std::unique_ptr<httplib::Client> client;
    std::string path;
    std::string server_address;
};

TunnelHttpSession::TunnelHttpSession(const TunnelEndpointConfig& config)
    : impl_(std::make_unique<Impl>()) {
    ParsedUrl url = ParsedUrl::parse(config.gateway_url);
    impl_->path = url.path == "/" ? "/rpc" : url.path;
    impl_->server_address = config.server_address;

    impl_->client = std::make_unique<httplib::Client>(
        url.scheme + "://" + url.host + ":" + std::to_string(url.port));
    httplib::Client& cli = *impl_->client;
    cli.set_keep_alive(true);
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(
        config.http_timeout));
    cli.set_read_timeout(config.http_timeout);
    cli.set_write_timeout(config.http_timeout);
    if (url.scheme == "https") {
        if (config.insecure_skip_verify) {
            cli.enable_server_certificate_verification(false);
        } else if (!config.ca_file.empty()) {
            cli.set_ca_cert_path(config.ca_file);
        }
    }
}

TunnelHttpSession::~TunnelHttpSession() = default;

std::vector<uint8_t> TunnelHttpSession::tunnel_call(std::span<const uint8_t> framed_call,
                                                    uint32_t expect_xid) {
    httplib::Headers headers = {
        // The literal type the original system used, kept for traceability.
        {"X-Paper-Content-Type", "application/stream"},
    };
    if (!impl_->server_address.empty())
        headers.emplace("X-RPC-Server", impl_->server_address);

    httplib::Result result = impl_->client->Post(
        impl_->path, headers,
        reinterpret_cast<const char*>(framed_call.data()), framed_call.size(),
        "application/octet-stream");

    if (!result) {
        switch (result.error()) {
        case httplib::Error::SSLServerVerification:
        case httplib::Error::SSLLoadingCerts:
        case httplib::Error::SSLConnection:
            throw TunnelError(TunnelError::Kind::tls_verification,
                              "gateway TLS failure: " + httplib::to_string(result.error()));
        default:
            throw TunnelError(TunnelError::Kind::gateway_unreachable,
                              "gateway unreachable: " + httplib::to_string(result.error()));
        }
    }
    if (result->status != 200)
        throw TunnelError(TunnelError::Kind::gateway_http,
                          "gateway returned " + std::to_string(result->status),
                          result->status);

    std::vector<uint8_t> body(result->body.begin(), result->body.end());
    // The body must be exactly one record-marked reply with the call's xid.
    MemorySource src(body);
    auto reply = reassemble_record(src);
    if (!reply || !src.exhausted())
        throw ProtocolError(Errc::bad_reply, "tunnel: response is not one rpc record");
    ReplyStatus status = parse_reply_status(*reply);
    if (status.xid != expect_xid)
        throw TunnelError(TunnelError::Kind::xid_mismatch,
                          "reply xid " + std::to_string(status.xid) + " != call xid " +
                              std::to_string(expect_xid));
    return body;
}

void RpcFilter::start(const TunnelEndpointConfig& config) {
    if (config.versions.empty())
        throw TunnelError(TunnelError::Kind::bad_config, "no versions configured");
    ParsedUrl url = ParsedUrl::parse(config.gateway_url);
    if (url.scheme == "http" && !config.insecure_skip_verify)
        throw TunnelError(TunnelError::Kind::bad_config,
                          "plain-http gateway url requires --insecure");

    config_ = config;
    server_.start(config.listen_host, config.listen_port,
                  [this](TcpSocket& sock) { serve_session(sock); });

    // Register every version; on refusal roll back and abort.
    for (uint32_t vers : config.versions) {
        bool ok = false;
        std::string detail;
        try {
            ok = pmap_set(config.portmapper,
                          {config.prog, vers, pmap::kProtoTcp, server_.port()});
        } catch (const std::exception& e) {
            detail = std::string(": ") + e.what();
        }
        if (!ok) {
            for (uint32_t done : registered_versions_) {
                try {
                    pmap_unset(config.portmapper, config.prog, done);
                } catch (const std::exception&) {
                }
            }
            registered_versions_.clear();
            server_.stop();
            throw TunnelError(TunnelError::Kind::registration,
                              "portmapper SET refused for prog " +
                                  std::to_string(config.prog) + " vers " +
                                  std::to_string(vers) + detail);
        }
        registered_versions_.push_back(vers);
    }
    RT_LOG_INFO("rpcfilter: prog %u on port %u, gateway %s", config.prog,
                server_.port(), config.gateway_url.c_str());
}

void RpcFilter::stop() {
    for (uint32_t vers : registered_versions_) {
        try {
            pmap_unset(config_.portmapper, config_.prog, vers);
        } catch (const std::exception& e) {
            RT_LOG_INFO("rpcfilter: unset failed: %s", e.what());
        }
    }
    registered_versions_.clear();
    server_.stop();
}

void RpcFilter::serve_session(TcpSocket& sock) {
    TunnelHttpSession http(config_);
    SocketSource src(sock);
    // One request-response cycle at a time; parallelism comes from
    // concurrent local connections.
    for (;;) {
        std::optional<FramedRecord> call;
        try {
            call = reassemble_record_capture(src);
        } catch (const std::exception& e) {
            RT_LOG_INFO("rpcfilter: bad local stream: %s", e.what());
            return;
        }
        if (!call) return;  // local client done

        CallTarget target;
        try {
            target = parse_call_target(call->payload);
        } catch (const ProtocolError& e) {
            RT_LOG_INFO("rpcfilter: local bytes are not an rpc call: %s", e.what());
            return;
        }

        std::vector<uint8_t> reply;
        try {
            reply = http.tunnel_call(call->raw, target.xid);
        } catch (const std::exception& e) {
            // The paper's behavior: a tunnel failure ends the rpc session.
            RT_LOG_INFO("rpcfilter: tunnel call failed: %s", e.what());
            return;
        }
        calls_.fetch_add(1);
        try {
            sock.write_all(reply);
        } catch (const NetError& e) {
            RT_LOG_DEBUG("rpcfilter: local write failed: %s", e.what());
            return;
        }
    }
}

}  // namespace rpctunnel
