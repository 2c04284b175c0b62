#pragma once

// MQTT 3.1.1 control packets (the subset used by this project) and their
// wire codec.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace teach::bus {

using Bytes = std::vector<std::uint8_t>;

enum class PacketType : std::uint8_t {
    Connect = 1,
    Connack = 2,
    Publish = 3,
    Puback = 4,
    Subscribe = 8,
    Suback = 9,
    Unsubscribe = 10,
    Unsuback = 11,
    Pingreq = 12,
    Pingresp = 13,
    Disconnect = 14,
};

struct Connect {
    std::string client_id;
    std::uint16_t keepalive = 60;
    bool clean_session = true;
    std::string protocol_name = "MQTT";
    std::uint8_t protocol_level = 4;
    friend bool operator==(const Connect&, const Connect&) = default;
};

enum class ConnectReturn : std::uint8_t {
    Accepted = 0,
    BadProtocolVersion = 1,
    IdentifierRejected = 2,
    ServerUnavailable = 3,
    BadCredentials = 4,
    NotAuthorized = 5,
};

struct Connack {
    bool session_present = false;
    ConnectReturn code = ConnectReturn::Accepted;
    friend bool operator==(const Connack&, const Connack&) = default;
};

struct Publish {
    bool dup = false;
    std::uint8_t qos = 0;
    bool retain = false;
    std::string topic;
    std::uint16_t packet_id = 0;  // only meaningful when qos > 0
    Bytes payload;
    friend bool operator==(const Publish&, const Publish&) = default;
};

struct Puback {
    std::uint16_t packet_id = 0;
    friend bool operator==(const Puback&, const Puback&) = default;
};

struct Subscription {
    std::string filter;
    std::uint8_t qos = 0;
    friend bool operator==(const Subscription&, const Subscription&) = default;
};

struct Subscribe {
    std::uint16_t packet_id = 0;
    std::vector<Subscription> topics;
    friend bool operator==(const Subscribe&, const Subscribe&) = default;
};

inline constexpr std::uint8_t kSubackFailure = 0x80;

struct Suback {
    std::uint16_t packet_id = 0;
    std::vector<std::uint8_t> return_codes;
    friend bool operator==(const Suback&, const Suback&) = default;
};

struct Unsubscribe {
    std::uint16_t packet_id = 0;
    std::vector<std::string> filters;
    friend bool operator==(const Unsubscribe&, const Unsubscribe&) = default;
};

struct Unsuback {
    std::uint16_t packet_id = 0;
    friend bool operator==(const Unsuback&, const Unsuback&) = default;
};

struct Pingreq {
    friend bool operator==(const Pingreq&, const Pingreq&) = default;
};
struct Pingresp {
    friend bool operator==(const Pingresp&, const Pingresp&) = default;
};
struct Disconnect {
    friend bool operator==(const Disconnect&, const Disconnect&) = default;
};

using Packet = std::variant<Connect, Connack, Publish, Puback, Subscribe, Suback, Unsubscribe,
                            Unsuback, Pingreq, Pingresp, Disconnect>;

PacketType packet_type(const Packet& packet);
const char* packet_name(PacketType type);

enum class DecodeErrorKind {
    UnsupportedType,
    MalformedRemainingLength,
    Truncated,
    Malformed,
};

class DecodeError : public std::runtime_error {
public:
    DecodeError(DecodeErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    DecodeErrorKind kind() const noexcept { return kind_; }

private:
    DecodeErrorKind kind_;
};

/// Serialises a packet, including fixed header and variable-length
/// remaining-length field. Throws ValidationError for unencodable values
/// (strings over 65535 bytes, qos > 1, packet body over 256 MiB).
Bytes encode_packet(const Packet& packet);

/// Decodes exactly one packet occupying the whole of `bytes`.
Packet decode_packet(std::span<const std::uint8_t> bytes);

/// Appends the variable-length remaining-length encoding of `value`.
void encode_remaining_length(std::uint32_t value, Bytes& out);

struct FrameHeader {
    std::size_t header_size = 0;  // fixed header byte + length bytes
    std::uint32_t remaining_length = 0;
    std::size_t total() const noexcept { return header_size + remaining_length; }
};

/// Parses the fixed header at the front of `bytes`. Returns nullopt when
/// more bytes are needed; throws DecodeError for a malformed length.
std::optional<FrameHeader> peek_frame(std::span<const std::uint8_t> bytes);

}  // namespace teach::bus
