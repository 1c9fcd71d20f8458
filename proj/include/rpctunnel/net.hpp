#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <list>
#include <mutex>
#include <span>
#include <string>
#include <thread>

#include "rpctunnel/errors.hpp"
#include "rpctunnel/rpc_message.hpp"

namespace rpctunnel {

struct HostPort {
    std::string host;
    uint16_t port = 0;

    // Parses "host:port"; the last colon splits, so bare IPv4/hostnames only.
    static HostPort parse(const std::string& text);
    std::string str() const { return host + ":" + std::to_string(port); }

    bool operator==(const HostPort&) const = default;
};

inline constexpr std::chrono::milliseconds kDefaultConnectTimeout{5000};

// Move-only RAII wrapper over a connected TCP socket.
class TcpSocket {
public:
    TcpSocket() = default;
    explicit TcpSocket(int fd) : fd_(fd) {}
    ~TcpSocket() { close(); }

    TcpSocket(TcpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    TcpSocket& operator=(TcpSocket&& other) noexcept;
    TcpSocket(const TcpSocket&) = delete;
    TcpSocket& operator=(const TcpSocket&) = delete;

    // Resolves host (name or literal) and connects with a bounded wait.
    static TcpSocket connect_to(const std::string& host, uint16_t port,
                                std::chrono::milliseconds timeout = kDefaultConnectTimeout);

    bool valid() const { return fd_ >= 0; }
    int native() const { return fd_; }

    // Returns bytes read (>=1), or 0 on orderly peer shutdown. Throws
    // NetError on socket errors, NetError(timeout) when a read timeout
    // is configured and expires.
    size_t read_some(uint8_t* dst, size_t n);
    void write_all(std::span<const uint8_t> data);

    void set_read_timeout(std::chrono::milliseconds timeout);
    void set_write_timeout(std::chrono::milliseconds timeout);

    void shutdown_write();
    void shutdown_both();  // safe to call from another thread to unblock reads
    void close();

    uint16_t local_port() const;
    std::string peer_address() const;

private:
    int fd_ = -1;
};

// Listening socket bound to an address.
class TcpListener {
public:
    TcpListener() = default;
    ~TcpListener() { close(); }

    TcpListener(TcpListener&& other) noexcept : fd_(other.fd_), port_(other.port_) {
        other.fd_ = -1;
        other.port_ = 0;
    }
    TcpListener& operator=(TcpListener&&) = delete;
    TcpListener(const TcpListener&) = delete;

    // Binds and listens; port 0 picks an ephemeral port (see port()).
    // Throws NetError(bind_failure).
    static TcpListener bind_on(const std::string& host, uint16_t port, int backlog = 64);

    // Blocks until a connection arrives. Throws NetError(closed) once the
    // listener has been closed from another thread.
    TcpSocket accept();

    uint16_t port() const { return port_; }
    bool valid() const { return fd_ >= 0; }

    // Wakes any thread blocked in accept(); the fd stays valid until close().
    void interrupt();
    void close();

private:
    int fd_ = -1;
    uint16_t port_ = 0;
};

// ByteSource over a socket, for record reassembly straight off the wire.
class SocketSource : public ByteSource {
public:
    explicit SocketSource(TcpSocket& sock) : sock_(sock) {}
    size_t read_some(uint8_t* dst, size_t n) override { return sock_.read_some(dst, n); }

private:
    TcpSocket& sock_;
};

// Accepts connections on a thread and runs a handler per connection,
// tracking live sessions so stop() can unblock and join them.
class TcpServer {
public:
    using Handler = std::function<void(TcpSocket&)>;

    TcpServer() = default;
    ~TcpServer() { stop(); }
    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;

    void start(const std::string& host, uint16_t port, Handler handler);
    void stop();

    bool running() const { return listener_.valid(); }
    uint16_t port() const { return listener_.port(); }
    uint64_t connections_accepted() const;

private:
    struct Session {
        TcpSocket sock;
        std::thread thread;
        bool finished = false;
    };

    void accept_loop();
    void reap_finished_locked();

    TcpListener listener_;
    Handler handler_;
    std::thread accept_thread_;
    mutable std::mutex mutex_;
    std::list<Session> sessions_;
    uint64_t accepted_ = 0;
};

}  // namespace rpctunnel
