#pragma once

#include <cstdint>
#include <string>

#include "rpctunnel/net.hpp"

namespace rpctunnel {

struct RelayStats {
    uint64_t client_to_server = 0;
    uint64_t server_to_client = 0;
};

// Pumps bytes both ways between two open connections until both
// directions have seen end-of-stream or either side errors. End-of-stream
// on one side half-closes the other; the opposite direction keeps flowing.
RelayStats relay(TcpSocket& client_conn, TcpSocket& server_conn);

// The generic bidirectional TCP relay: a server for the client and a
// client for the server. Each accepted connection gets a fresh
// destination connection and an independent relay session.
class TcpFilter {
public:
    ~TcpFilter() { stop(); }

    // Throws NetError(bind_failure). A per-session destination connect
    // failure closes that client connection; the service keeps running.
    void start(uint16_t source_port, const std::string& destination_host,
               uint16_t destination_port, const std::string& bind_host = "0.0.0.0");
    void stop();

    uint16_t port() const { return server_.port(); }
    uint64_t sessions_accepted() const { return server_.connections_accepted(); }

private:
    TcpServer server_;
};

}  // namespace rpctunnel
