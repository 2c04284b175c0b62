#pragma once

// Thin RAII wrappers over blocking POSIX TCP sockets.

#include "teach/bus/packet.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace teach::bus {

class NetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ReadStatus { Ok, Eof, Timeout };

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) noexcept : fd_(fd) {}
    ~Socket();
    Socket(Socket&& other) noexcept;
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    bool valid() const noexcept { return fd_ >= 0; }
    int fd() const noexcept { return fd_; }

    /// Wakes any thread blocked in read/write on this socket.
    void shutdown() noexcept;
    void close() noexcept;

    void write_all(std::span<const std::uint8_t> data);

    /// Reads exactly data.size() bytes. `timeout` bounds the wait for the
    /// first byte and for each subsequent chunk; nullopt waits forever.
    ReadStatus read_exact(std::span<std::uint8_t> data, std::optional<std::chrono::milliseconds> timeout);

    std::string peer() const;

private:
    int fd_ = -1;
};

/// Connects to host:port with TCP_NODELAY set.
Socket connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);

class Listener {
public:
    /// Binds and listens; port 0 picks an ephemeral port. Throws NetError.
    Listener(const std::string& host, std::uint16_t port);

    std::uint16_t port() const noexcept { return port_; }

    /// Blocks until a connection arrives; returns an invalid socket once
    /// close() has been called.
    Socket accept();
    void close() noexcept;

private:
    Socket sock_;
    std::uint16_t port_ = 0;
};

struct ReadPacketResult {
    ReadStatus status = ReadStatus::Eof;
    Bytes frame;  // whole packet including fixed header, when status == Ok
};

/// Reads one framed MQTT packet. Throws DecodeError for a malformed
/// remaining length or when the frame exceeds `max_frame` bytes.
ReadPacketResult read_frame(Socket& sock, std::size_t max_frame,
                            std::optional<std::chrono::milliseconds> timeout);

struct Address {
    std::string host = "127.0.0.1";
    std::uint16_t port = 1883;
};

/// Parses "tcp://host:port", "host:port" or "host" (default port 1883).
Address parse_address(const std::string& text, std::uint16_t default_port = 1883);

}  // namespace teach::bus
