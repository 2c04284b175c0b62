#pragma once

#include "teach/bus/envelope.hpp"
#include "teach/bus/socket.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace teach::app {

/// WebSocket endpoint for the dashboard. Every envelope on `teaching/#` is
/// forwarded to all connected clients as a text frame
/// {"topic": ..., "payload": ...}. Frames from clients are published only
/// when their topic lies under `teaching/ui/`; anything else is answered
/// with an {"error": ...} frame and the connection stays open.
class Bridge {
public:
    /// Connects to the broker and listens on host:port (0 = ephemeral).
    /// Throws bus::NetError on bind failure.
    Bridge(const bus::Address& broker, const std::string& host, std::uint16_t port);
    ~Bridge();
    Bridge(const Bridge&) = delete;
    Bridge& operator=(const Bridge&) = delete;

    std::uint16_t port() const;
    std::size_t connections() const;
    /// Idempotent.
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Validates an upstream frame and returns the envelope to publish.
/// Throws ValidationError describing the rejection.
bus::Envelope parse_upstream_frame(const std::string& text);

/// The downstream frame for an envelope.
std::string downstream_frame(const bus::Envelope& envelope);

}  // namespace teach::app
