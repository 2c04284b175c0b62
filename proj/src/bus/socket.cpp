#include "teach/bus/socket.hpp"

#include "teach/common/error.hpp"

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

namespace teach::bus {
namespace {

std::string errno_text(const char* what) {
    return std::string(what) + ": " + std::strerror(errno);
}

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) {
        hints.ai_flags = AI_PASSIVE;
    }
    addrinfo* result = nullptr;
    const auto service = std::to_string(port);
    const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &result);
    if (rc != 0) {
        throw NetError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    return result;
}

}  // namespace

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void Socket::shutdown() noexcept {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
    }
}

void Socket::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void Socket::write_all(std::span<const std::uint8_t> data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const auto n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw NetError(errno_text("send"));
        }
        sent += static_cast<std::size_t>(n);
    }
}

ReadStatus Socket::read_exact(std::span<std::uint8_t> data, std::optional<std::chrono::milliseconds> timeout) {
    std::size_t got = 0;
    while (got < data.size()) {
        if (timeout) {
            pollfd pfd{fd_, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, static_cast<int>(timeout->count()));
            if (rc == 0) {
                return ReadStatus::Timeout;
            }
            if (rc < 0) {
                if (errno == EINTR) {
                    continue;
                }
                throw NetError(errno_text("poll"));
            }
        }
        const auto n = ::recv(fd_, data.data() + got, data.size() - got, 0);
        if (n == 0) {
            return ReadStatus::Eof;
        }
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            if (errno == ECONNRESET || errno == EBADF || errno == ENOTCONN) {
                return ReadStatus::Eof;
            }
            throw NetError(errno_text("recv"));
        }
        got += static_cast<std::size_t>(n);
    }
    return ReadStatus::Ok;
}

std::string Socket::peer() const {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (::getpeername(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
        return "?";
    }
    char buf[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof(buf));
    return std::string(buf) + ":" + std::to_string(ntohs(addr.sin_port));
}

Socket connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
    addrinfo* info = resolve(host, port, false);
    std::string last_error = "no addresses";
    for (addrinfo* ai = info; ai != nullptr; ai = ai->ai_next) {
        Socket sock(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
        if (!sock.valid()) {
            last_error = errno_text("socket");
            continue;
        }
        const int flags = ::fcntl(sock.fd(), F_GETFL, 0);
        ::fcntl(sock.fd(), F_SETFL, flags | O_NONBLOCK);
        int rc = ::connect(sock.fd(), ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS) {
            pollfd pfd{sock.fd(), POLLOUT, 0};
            const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
            if (ready == 1) {
                int err = 0;
                socklen_t len = sizeof(err);
                ::getsockopt(sock.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
                rc = err == 0 ? 0 : -1;
                errno = err;
            } else {
                rc = -1;
                if (ready == 0) {
                    errno = ETIMEDOUT;
                }
            }
        }
        if (rc != 0) {
            last_error = errno_text("connect");
            continue;
        }
        ::fcntl(sock.fd(), F_SETFL, flags);
        set_nodelay(sock.fd());
        ::freeaddrinfo(info);
        return sock;
    }
    ::freeaddrinfo(info);
    throw NetError("cannot connect to " + host + ":" + std::to_string(port) + " (" + last_error + ")");
}

Listener::Listener(const std::string& host, std::uint16_t port) {
    addrinfo* info = resolve(host, port, true);
    sock_ = Socket(::socket(info->ai_family, info->ai_socktype, info->ai_protocol));
    if (!sock_.valid()) {
        ::freeaddrinfo(info);
        throw NetError(errno_text("socket"));
    }
    int one = 1;
    ::setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(sock_.fd(), info->ai_addr, info->ai_addrlen) != 0) {
        const auto msg = errno_text(("bind " + host + ":" + std::to_string(port)).c_str());
        ::freeaddrinfo(info);
        throw NetError(msg);
    }
    ::freeaddrinfo(info);
    if (::listen(sock_.fd(), 64) != 0) {
        throw NetError(errno_text("listen"));
    }
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    ::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

Socket Listener::accept() {
    while (true) {
        const int fd = ::accept(sock_.fd(), nullptr, nullptr);
        if (fd >= 0) {
            set_nodelay(fd);
            return Socket(fd);
        }
        if (errno == EINTR || errno == ECONNABORTED) {
            continue;
        }
        return Socket();
    }
}

void Listener::close() noexcept {
    sock_.shutdown();
}

ReadPacketResult read_frame(Socket& sock, std::size_t max_frame, std::optional<std::chrono::milliseconds> timeout) {
    ReadPacketResult result;
    Bytes& frame = result.frame;
    frame.resize(1);
    result.status = sock.read_exact(frame, timeout);
    if (result.status != ReadStatus::Ok) {
        return result;
    }
    std::optional<FrameHeader> header;
    while (!(header = peek_frame(frame))) {
        std::uint8_t b = 0;
        result.status = sock.read_exact({&b, 1}, timeout);
        if (result.status != ReadStatus::Ok) {
            return result;
        }
        frame.push_back(b);
    }
    if (header->total() > max_frame) {
        throw DecodeError(DecodeErrorKind::Malformed,
                          "packet of " + std::to_string(header->total()) + " bytes exceeds limit");
    }
    const auto header_size = frame.size();
    frame.resize(header->total());
    result.status = sock.read_exact(std::span(frame).subspan(header_size), timeout);
    return result;
}

Address parse_address(const std::string& text, std::uint16_t default_port) {
    std::string rest = text;
    const std::string scheme = "tcp://";
    if (rest.rfind(scheme, 0) == 0) {
        rest = rest.substr(scheme.size());
    }
    Address addr;
    addr.port = default_port;
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) {
        addr.host = rest;
    } else {
        addr.host = rest.substr(0, colon);
        const auto port_text = rest.substr(colon + 1);
        try {
            std::size_t used = 0;
            const auto port = std::stoul(port_text, &used);
            if (used != port_text.size() || port > 65535) {
                throw ValidationError("bad port");
            }
            addr.port = static_cast<std::uint16_t>(port);
        } catch (const std::exception&) {
            throw ValidationError("invalid port in address \"" + text + "\"");
        }
    }
    if (addr.host.empty()) {
        throw ValidationError("missing host in address \"" + text + "\"");
    }
    return addr;
}

}  // namespace teach::bus
