#include "rpctunnel/tcpfilter.hpp"

#include <thread>

#include "rpctunnel/log.hpp"

namespace rpctunnel {

namespace {

constexpr size_t kRelayBufferSize = 16 * 1024;

// Copies one direction until end-of-stream, then half-closes the sink so
// the peer sees EOF while its own sending side stays usable.
uint64_t pump(TcpSocket& from, TcpSocket& to) {
    uint8_t buffer[kRelayBufferSize];
    uint64_t total = 0;
    try {
        for (;;) {
            size_t n = from.read_some(buffer, sizeof(buffer));
            if (n == 0) break;
            to.write_all({buffer, n});
            total += n;
        }
        to.shutdown_write();
    } catch (const NetError&) {
        // Error tears down the whole session, both directions.
        from.shutdown_both();
        to.shutdown_both();
    }
    return total;
}

}  // namespace

RelayStats relay(TcpSocket& client_conn, TcpSocket& server_conn) {
    RelayStats stats;
    std::thread backward(
        [&] { stats.server_to_client = pump(server_conn, client_conn); });
    stats.client_to_server = pump(client_conn, server_conn);
    backward.join();
    return stats;
}

void TcpFilter::start(uint16_t source_port, const std::string& destination_host,
                      uint16_t destination_port, const std::string& bind_host) {
    server_.start(bind_host, source_port, [destination_host, destination_port](TcpSocket& client) {
        TcpSocket server_conn;
        try {
            server_conn = TcpSocket::connect_to(destination_host, destination_port);
        } catch (const NetError& e) {
            RT_LOG_INFO("tcpfilter: destination unreachable: %s", e.what());
            return;  // client socket closes with the session
        }
        RelayStats stats = relay(client, server_conn);
        RT_LOG_DEBUG("tcpfilter: session done, %llu bytes up, %llu bytes down",
                     static_cast<unsigned long long>(stats.client_to_server),
                     static_cast<unsigned long long>(stats.server_to_client));
    });
    RT_LOG_INFO("tcpfilter: relaying %u -> %s:%u", server_.port(),
                destination_host.c_str(), destination_port);
}

void TcpFilter::stop() { server_.stop(); }

}  // namespace rpctunnel
