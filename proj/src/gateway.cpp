#include "rpctunnel/gateway.hpp"

#include <arpa/inet.h>

#include <istream>
#include <ostream>

#include "rpctunnel/http.hpp"
#include "rpctunnel/log.hpp"

namespace rpctunnel {

CidrPrefix CidrPrefix::parse(const std::string& text) {
    CidrPrefix prefix;
    prefix.text = text;
    std::string addr = text;
    int bits = 32;
    size_t slash = text.find('/');
    if (slash != std::string::npos) {
        addr = text.substr(0, slash);
        try {
            size_t idx = 0;
            bits = std::stoi(text.substr(slash + 1), &idx);
            if (idx != text.size() - slash - 1) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ConfigError("bad prefix length in '" + text + "'");
        }
        if (bits < 0 || bits > 32)
            throw ConfigError("prefix length out of range in '" + text + "'");
    }
    in_addr parsed{};
    if (inet_pton(AF_INET, addr.c_str(), &parsed) == 1) {
        prefix.network = ntohl(parsed.s_addr);
        prefix.prefix_len = bits;
        if (bits < 32) prefix.network &= ~uint32_t(0) << (32 - bits);
    } else if (slash != std::string::npos) {
        throw ConfigError("bad network address in '" + text + "'");
    }
    // Otherwise keep it as an exact-string entry.
    return prefix;
}

bool CidrPrefix::matches(const std::string& address) const {
    if (prefix_len < 0) return address == text;
    in_addr parsed{};
    if (inet_pton(AF_INET, address.c_str(), &parsed) != 1) return false;
    uint32_t value = ntohl(parsed.s_addr);
    if (prefix_len == 0) return true;
    uint32_t mask = ~uint32_t(0) << (32 - prefix_len);
    return (value & mask) == network;
}

ProgramAllow ProgramAllow::parse(const std::string& text) {
    ProgramAllow allow;
    std::string prog_part = text;
    size_t colon = text.find(':');
    if (colon != std::string::npos) prog_part = text.substr(0, colon);
    try {
        size_t idx = 0;
        allow.prog = static_cast<uint32_t>(std::stoul(prog_part, &idx));
        if (idx != prog_part.size() || prog_part.empty()) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw ConfigError("bad program number in '" + text + "'");
    }
    if (colon != std::string::npos) {
        std::string vers_part = text.substr(colon + 1);
        size_t start = 0;
        while (start <= vers_part.size()) {
            size_t comma = vers_part.find(',', start);
            std::string item = vers_part.substr(
                start, comma == std::string::npos ? std::string::npos : comma - start);
            try {
                size_t idx = 0;
                allow.versions.insert(static_cast<uint32_t>(std::stoul(item, &idx)));
                if (idx != item.size() || item.empty()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw ConfigError("bad version list in '" + text + "'");
            }
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    return allow;
}

std::string ProgramAllow::str() const {
    std::string out = std::to_string(prog);
    if (!versions.empty()) {
        char sep = ':';
        for (uint32_t v : versions) {
            out += sep;
            out += std::to_string(v);
            sep = ',';
        }
    }
    return out;
}

bool GatewayPolicy::allows_program(uint32_t prog, uint32_t vers) const {
    for (const ProgramAllow& allow : allowed_programs) {
        if (allow.prog != prog) continue;
        if (allow.versions.empty() || allow.versions.count(vers)) return true;
    }
    return false;
}

bool GatewayPolicy::allows_client(const std::string& address) const {
    if (allowed_client_networks.empty()) return true;
    for (const CidrPrefix& prefix : allowed_client_networks)
        if (prefix.matches(address)) return true;
    return false;
}

const char* http_status_reason(int status) {
    switch (status) {
    case 200: return "OK";
    case 400: return "Bad Request";
    case 403: return "Forbidden";
    case 404: return "Not Found";
    case 405: return "Method Not Allowed";
    case 413: return "Payload Too Large";
    case 502: return "Bad Gateway";
    default: return "Error";
    }
}

HostPort resolve_backend(uint32_t prog, uint32_t vers, const HostPort& portmapper,
                         const std::string& backend_host,
                         const PortmapClientConfig& pmap_config) {
    uint32_t port;
    try {
        port = pmap_getport(portmapper, prog, vers, pmap::kProtoTcp, pmap_config);
    } catch (const std::exception& e) {
        throw GatewayError(GatewayError::Kind::portmapper_unreachable,
                           std::string("portmapper: ") + e.what());
    }
    if (port == 0)
        throw GatewayError(GatewayError::Kind::not_registered,
                           "program " + std::to_string(prog) + " version " +
                               std::to_string(vers) + " not registered");
    return {backend_host, static_cast<uint16_t>(port)};
}

std::vector<uint8_t> forward_call(const HostPort& backend,
                                  std::span<const uint8_t> call_record_framed,
                                  size_t max_reply_bytes) {
    TcpSocket sock;
    try {
        sock = TcpSocket::connect_to(backend.host, backend.port);
    } catch (const NetError& e) {
        throw GatewayError(GatewayError::Kind::connect_failure,
                           "backend " + backend.str() + ": " + e.what());
    }
    try {
        sock.set_read_timeout(std::chrono::milliseconds(10000));
        sock.write_all(call_record_framed);
        SocketSource src(sock);
        auto reply = reassemble_record_capture(src, max_reply_bytes);
        if (!reply)
            throw GatewayError(GatewayError::Kind::backend_io,
                               "backend closed without replying");
        return std::move(reply->raw);
    } catch (const ProtocolError& e) {
        if (e.code() == Errc::oversize_record)
            throw GatewayError(GatewayError::Kind::reply_oversize, e.what());
        throw GatewayError(GatewayError::Kind::backend_io, e.what());
    } catch (const NetError& e) {
        throw GatewayError(GatewayError::Kind::backend_io, e.what());
    }
}

RpcPostResult handle_rpc_post(std::span<const uint8_t> body,
                              const std::string& client_address,
                              const GatewayPolicy& policy,
                              const HostPort& portmapper,
                              const PortmapClientConfig& pmap_config) {
    // Client restriction applies before the body is even looked at.
    if (!policy.allows_client(client_address)) {
        RT_LOG_INFO("gateway: denied client %s", client_address.c_str());
        return {403, "client address not allowed\n"};
    }

    MemorySource src(body);
    RpcRecord record;
    try {
        auto rec = reassemble_record(src, policy.max_record_bytes);
        if (!rec) return {400, "empty request body\n"};
        record = std::move(*rec);
    } catch (const ProtocolError& e) {
        if (e.code() == Errc::oversize_record) return {413, "record too large\n"};
        return {400, "malformed record framing\n"};
    }
    // One call per request; trailing bytes mean a pipelined body.
    if (!src.exhausted()) return {400, "multiple records in one request\n"};

    CallTarget target;
    try {
        target = parse_call_target(record);
    } catch (const ProtocolError&) {
        return {400, "not an rpc call\n"};
    }

    if (!policy.allows_program(target.prog, target.vers)) {
        RT_LOG_INFO("gateway: denied prog %u vers %u from %s", target.prog,
                    target.vers, client_address.c_str());
        return {403, "program not allowed\n"};
    }

    try {
        HostPort backend = resolve_backend(target.prog, target.vers, portmapper,
                                           policy.backend_host, pmap_config);
        std::vector<uint8_t> reply =
            forward_call(backend, body, policy.max_record_bytes);
        RT_LOG_DEBUG("gateway: xid %u prog %u -> %s, %zu reply bytes", target.xid,
                     target.prog, backend.str().c_str(), reply.size());
        return {200, std::string(reply.begin(), reply.end())};
    } catch (const GatewayError& e) {
        RT_LOG_INFO("gateway: %s", e.what());
        if (e.kind() == GatewayError::Kind::not_registered)
            return {404, "program not registered\n"};
        return {502, "backend failure\n"};
    }
}

struct GatewayServer::Impl {
    std::unique_ptr<httplib::Server> server;
    std::thread thread;
    std::atomic<uint64_t> posts{0};
    GatewayPolicy policy;
    HostPort portmapper;
};

GatewayServer::GatewayServer() : impl_(std::make_unique<Impl>()) {}
GatewayServer::~GatewayServer() { stop(); }

void GatewayServer::start(const std::string& listen_host, uint16_t listen_port,
                          const std::optional<TlsServerConfig>& tls,
                          const GatewayPolicy& policy, const HostPort& portmapper) {
    impl_->policy = policy;
    impl_->portmapper = portmapper;

    if (tls && tls->enabled()) {
        const char* client_ca = nullptr;
        if (tls->require_client_cert) {
            if (tls->client_ca.empty())
                throw ConfigError("require-client-cert needs a client CA file");
            client_ca = tls->client_ca.c_str();
        }
        auto ssl = std::make_unique<httplib::SSLServer>(
            tls->certificate_chain.c_str(), tls->private_key.c_str(), client_ca);
        if (!ssl->is_valid())
            throw ConfigError("failed to load TLS certificate/key from '" +
                              tls->certificate_chain + "'");
        impl_->server = std::move(ssl);
    } else {
        impl_->server = std::make_unique<httplib::Server>();
    }

    httplib::Server& svr = *impl_->server;
    svr.Post("/rpc", [this](const httplib::Request& req, httplib::Response& res) {
        impl_->posts.fetch_add(1);
        std::span<const uint8_t> body(
            reinterpret_cast<const uint8_t*>(req.body.data()), req.body.size());
        RpcPostResult result = handle_rpc_post(body, req.remote_addr, impl_->policy,
                                               impl_->portmapper);
        res.status = result.status;
        res.set_content(result.body, result.status == 200 ? "application/octet-stream"
                                                          : "text/plain");
    });
    svr.Get("/rpc", [](const httplib::Request&, httplib::Response& res) {
        res.status = 405;
        res.set_header("Allow", "POST");
        res.set_content("use POST\n", "text/plain");
    });

    int port = listen_port == 0 ? svr.bind_to_any_port(listen_host)
                                : (svr.bind_to_port(listen_host, listen_port) ? listen_port : -1);
    if (port <= 0)
        throw NetError(NetError::Kind::bind_failure,
                       "gateway: cannot bind " + listen_host + ":" +
                           std::to_string(listen_port));
    port_ = static_cast<uint16_t>(port);

    impl_->thread = std::thread([this] { impl_->server->listen_after_bind(); });
    impl_->server->wait_until_ready();
    RT_LOG_INFO("gateway: %s on %s:%u", tls && tls->enabled() ? "https" : "http",
                listen_host.c_str(), port_);
}

void GatewayServer::stop() {
    if (!impl_ || !impl_->server) return;
    impl_->server->stop();
    if (impl_->thread.joinable()) impl_->thread.join();
    impl_->server.reset();
}

uint64_t GatewayServer::posts_served() const { return impl_->posts.load(); }

int run_cgi(std::istream& in, std::ostream& out, const GatewayPolicy& policy,
            const HostPort& portmapper, const std::string& client_address,
            const PortmapClientConfig& pmap_config) {
    std::vector<uint8_t> body;
    char chunk[4096];
    while (in.read(chunk, sizeof(chunk)) || in.gcount() > 0)
        body.insert(body.end(), chunk, chunk + in.gcount());

    RpcPostResult result =
        handle_rpc_post(body, client_address, policy, portmapper, pmap_config);

    // CGI response: Status line, content headers, blank line, raw bytes.
    // The reply record goes out as-is; wrapping it in markup would corrupt it.
    out << "Status: " << result.status << " " << http_status_reason(result.status)
        << "\r\n";
    out << "Content-Type: "
        << (result.status == 200 ? "application/octet-stream" : "text/plain") << "\r\n";
    out << "Content-Length: " << result.body.size() << "\r\n\r\n";
    out.write(result.body.data(), static_cast<std::streamsize>(result.body.size()));
    out.flush();
    return out.good() ? 0 : 2;
}

}  // namespace rpctunnel
