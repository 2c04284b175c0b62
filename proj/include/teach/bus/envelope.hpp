#pragma once

#include "teach/bus/packet.hpp"
#include "teach/common/json_util.hpp"

#include <cstddef>
#include <cstdint>
#include <string>

namespace teach::bus {

inline constexpr std::size_t kMaxEnvelopePayload = 256 * 1024;

/// A timestamped topic + payload message, the unit carried on the bus.
/// Construction validates the topic and payload size.
class Envelope {
public:
    Envelope(std::string topic, Bytes payload, std::uint8_t qos = 0);

    /// Serialises `payload` with canonical_dump().
    static Envelope from_json(std::string topic, const json& payload, std::uint8_t qos = 0);

    const std::string& topic() const noexcept { return topic_; }
    const Bytes& payload() const noexcept { return payload_; }
    std::uint8_t qos() const noexcept { return qos_; }

    std::string payload_text() const { return {payload_.begin(), payload_.end()}; }
    /// Parses the payload; throws ValidationError if it is not JSON.
    json payload_json() const;

    friend bool operator==(const Envelope&, const Envelope&) = default;

private:
    std::string topic_;
    Bytes payload_;
    std::uint8_t qos_;
};

}  // namespace teach::bus
