#include "rpctunnel/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "rpctunnel/log.hpp"

namespace rpctunnel {

namespace {

std::string errno_str() { return std::strerror(errno); }

void set_timeout_opt(int fd, int opt, std::chrono::milliseconds timeout) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    setsockopt(fd, SOL_SOCKET, opt, &tv, sizeof(tv));
}

}  // namespace

HostPort HostPort::parse(const std::string& text) {
    size_t colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
        throw ConfigError("expected host:port, got '" + text + "'");
    unsigned long port = 0;
    try {
        size_t idx = 0;
        port = std::stoul(text.substr(colon + 1), &idx);
        if (idx != text.size() - colon - 1) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw ConfigError("bad port in '" + text + "'");
    }
    if (port == 0 || port > 65535)
        throw ConfigError("port out of range in '" + text + "'");
    return {text.substr(0, colon), static_cast<uint16_t>(port)};
}

TcpSocket& TcpSocket::operator=(TcpSocket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

TcpSocket TcpSocket::connect_to(const std::string& host, uint16_t port,
                                std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    std::string service = std::to_string(port);
    int rc = getaddrinfo(host.c_str(), service.c_str(), &hints, &res);
    if (rc != 0)
        throw NetError(NetError::Kind::resolve,
                       "resolve " + host + ": " + gai_strerror(rc));

    std::string last_error = "no addresses";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        int fd = socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) {
            last_error = errno_str();
            continue;
        }
        // Non-blocking connect with a poll deadline, then back to blocking.
        int flags = fcntl(fd, F_GETFL, 0);
        fcntl(fd, F_SETFL, flags | O_NONBLOCK);
        rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc < 0 && errno == EINPROGRESS) {
            pollfd pfd{fd, POLLOUT, 0};
            rc = poll(&pfd, 1, static_cast<int>(timeout.count()));
            if (rc == 0) {
                last_error = "connect timed out";
                ::close(fd);
                continue;
            }
            int err = 0;
            socklen_t len = sizeof(err);
            getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
            if (rc < 0 || err != 0) {
                last_error = err != 0 ? std::strerror(err) : errno_str();
                ::close(fd);
                continue;
            }
        } else if (rc < 0) {
            last_error = errno_str();
            ::close(fd);
            continue;
        }
        fcntl(fd, F_SETFL, flags);
        int one = 1;
        setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        freeaddrinfo(res);
        return TcpSocket(fd);
    }
    freeaddrinfo(res);
    throw NetError(NetError::Kind::connect_failure,
                   "connect " + host + ":" + service + ": " + last_error);
}

size_t TcpSocket::read_some(uint8_t* dst, size_t n) {
    for (;;) {
        ssize_t r = ::recv(fd_, dst, n, 0);
        if (r >= 0) return static_cast<size_t>(r);
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK)
            throw NetError(NetError::Kind::timeout, "read timed out");
        throw NetError(NetError::Kind::io, "read: " + errno_str());
    }
}

void TcpSocket::write_all(std::span<const uint8_t> data) {
    size_t written = 0;
    while (written < data.size()) {
        ssize_t r = ::send(fd_, data.data() + written, data.size() - written, MSG_NOSIGNAL);
        if (r < 0) {
            if (errno == EINTR) continue;
            if (errno == EAGAIN || errno == EWOULDBLOCK)
                throw NetError(NetError::Kind::timeout, "write timed out");
            throw NetError(NetError::Kind::io, "write: " + errno_str());
        }
        written += static_cast<size_t>(r);
    }
}

void TcpSocket::set_read_timeout(std::chrono::milliseconds timeout) {
    set_timeout_opt(fd_, SO_RCVTIMEO, timeout);
}

void TcpSocket::set_write_timeout(std::chrono::milliseconds timeout) {
    set_timeout_opt(fd_, SO_SNDTIMEO, timeout);
}

void TcpSocket::shutdown_write() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

void TcpSocket::shutdown_both() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void TcpSocket::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

uint16_t TcpSocket::local_port() const {
    sockaddr_storage addr{};
    socklen_t len = sizeof(addr);
    if (getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) < 0) return 0;
    if (addr.ss_family == AF_INET)
        return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    if (addr.ss_family == AF_INET6)
        return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
    return 0;
}

std::string TcpSocket::peer_address() const {
    sockaddr_storage addr{};
    socklen_t len = sizeof(addr);
    if (getpeername(fd_, reinterpret_cast<sockaddr*>(&addr), &len) < 0) return "";
    char buf[INET6_ADDRSTRLEN] = {};
    if (addr.ss_family == AF_INET) {
        inet_ntop(AF_INET, &reinterpret_cast<sockaddr_in*>(&addr)->sin_addr, buf, sizeof(buf));
    } else if (addr.ss_family == AF_INET6) {
        inet_ntop(AF_INET6, &reinterpret_cast<sockaddr_in6*>(&addr)->sin6_addr, buf, sizeof(buf));
    }
    return buf;
}

TcpListener TcpListener::bind_on(const std::string& host, uint16_t port, int backlog) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    std::string service = std::to_string(port);
    int rc = getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res);
    if (rc != 0)
        throw NetError(NetError::Kind::bind_failure,
                       "resolve " + host + ": " + gai_strerror(rc));

    std::string last_error = "no addresses";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        int fd = socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) {
            last_error = errno_str();
            continue;
        }
        int one = 1;
        setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        if (bind(fd, ai->ai_addr, ai->ai_addrlen) < 0 || listen(fd, backlog) < 0) {
            last_error = errno_str();
            ::close(fd);
            continue;
        }
        sockaddr_storage bound{};
        socklen_t len = sizeof(bound);
        getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
        TcpListener lst;
        lst.fd_ = fd;
        lst.port_ = bound.ss_family == AF_INET6
                        ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
                        : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
        freeaddrinfo(res);
        return lst;
    }
    freeaddrinfo(res);
    throw NetError(NetError::Kind::bind_failure,
                   "bind " + host + ":" + service + ": " + last_error);
}

TcpSocket TcpListener::accept() {
    for (;;) {
        int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd >= 0) {
            int one = 1;
            setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            return TcpSocket(fd);
        }
        if (errno == EINTR) continue;
        throw NetError(NetError::Kind::closed, "accept: " + errno_str());
    }
}

void TcpListener::interrupt() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void TcpListener::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void TcpServer::start(const std::string& host, uint16_t port, Handler handler) {
    listener_ = TcpListener::bind_on(host, port);
    handler_ = std::move(handler);
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void TcpServer::accept_loop() {
    for (;;) {
        TcpSocket sock;
        try {
            sock = listener_.accept();
        } catch (const NetError&) {
            return;  // listener closed
        }
        std::lock_guard lock(mutex_);
        accepted_++;
        reap_finished_locked();
        sessions_.emplace_back();
        Session& session = sessions_.back();
        session.sock = std::move(sock);
        session.thread = std::thread([this, &session] {
            try {
                handler_(session.sock);
            } catch (const std::exception& e) {
                RT_LOG_DEBUG("session ended: %s", e.what());
            }
            std::lock_guard lk(mutex_);
            session.finished = true;
        });
    }
}

void TcpServer::reap_finished_locked() {
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        if (it->finished) {
            it->thread.join();
            it = sessions_.erase(it);
        } else {
            ++it;
        }
    }
}

void TcpServer::stop() {
    if (!listener_.valid() && !accept_thread_.joinable()) return;
    listener_.interrupt();
    if (accept_thread_.joinable()) accept_thread_.join();
    listener_.close();
    // Unblock sessions stuck in socket calls, then wait for them.
    std::list<Session> sessions;
    {
        std::lock_guard lock(mutex_);
        for (Session& session : sessions_) session.sock.shutdown_both();
        sessions.swap(sessions_);
    }
    for (Session& session : sessions)
        if (session.thread.joinable()) session.thread.join();
}

uint64_t TcpServer::connections_accepted() const {
    std::lock_guard lock(mutex_);
    return accepted_;
}

}  // namespace rpctunnel
