#include "teach/bus/packet.hpp"

#include "teach/common/error.hpp"

#include <type_traits>

namespace teach::bus {
namespace {

constexpr std::uint32_t kMaxRemainingLength = 268'435'455;

class Writer {
public:
    void u8(std::uint8_t v) { body_.push_back(v); }
    void u16(std::uint16_t v) {
        body_.push_back(static_cast<std::uint8_t>(v >> 8));
        body_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }
    void str(const std::string& s) {
        if (s.size() > 0xFFFF) {
            throw ValidationError("string field longer than 65535 bytes");
        }
        u16(static_cast<std::uint16_t>(s.size()));
        body_.insert(body_.end(), s.begin(), s.end());
    }
    void raw(const Bytes& b) { body_.insert(body_.end(), b.begin(), b.end()); }

    Bytes finish(std::uint8_t first_byte) const {
        if (body_.size() > kMaxRemainingLength) {
            throw ValidationError("packet body exceeds maximum remaining length");
        }
        Bytes out;
        out.reserve(body_.size() + 5);
        out.push_back(first_byte);
        encode_remaining_length(static_cast<std::uint32_t>(body_.size()), out);
        out.insert(out.end(), body_.begin(), body_.end());
        return out;
    }

private:
    Bytes body_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> body) : body_(body) {}

    std::uint8_t u8() {
        need(1);
        return body_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        const auto v = static_cast<std::uint16_t>((body_[pos_] << 8) | body_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::string str() {
        const auto len = u16();
        need(len);
        std::string s(reinterpret_cast<const char*>(body_.data() + pos_), len);
        pos_ += len;
        return s;
    }
    Bytes rest() {
        Bytes b(body_.begin() + static_cast<std::ptrdiff_t>(pos_), body_.end());
        pos_ = body_.size();
        return b;
    }
    bool done() const noexcept { return pos_ == body_.size(); }
    void expect_done(const char* what) const {
        if (!done()) {
            throw DecodeError(DecodeErrorKind::Malformed, std::string("trailing bytes in ") + what);
        }
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > body_.size()) {
            throw DecodeError(DecodeErrorKind::Malformed, "field runs past end of packet body");
        }
    }

    std::span<const std::uint8_t> body_;
    std::size_t pos_ = 0;
};

void require_flags(std::uint8_t flags, std::uint8_t expected, const char* name) {
    if (flags != expected) {
        throw DecodeError(DecodeErrorKind::Malformed, std::string("invalid fixed-header flags for ") + name);
    }
}

Bytes encode(const Connect& p) {
    Writer w;
    w.str(p.protocol_name);
    w.u8(p.protocol_level);
    w.u8(p.clean_session ? 0x02 : 0x00);
    w.u16(p.keepalive);
    w.str(p.client_id);
    return w.finish(0x10);
}

Bytes encode(const Connack& p) {
    Writer w;
    w.u8(p.session_present ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(p.code));
    return w.finish(0x20);
}

Bytes encode(const Publish& p) {
    if (p.qos > 1) {
        throw ValidationError("only QoS 0 and 1 are supported");
    }
    if (p.qos == 0 && p.dup) {
        throw ValidationError("DUP must be 0 for QoS 0");
    }
    if (p.qos == 1 && p.packet_id == 0) {
        throw ValidationError("QoS 1 PUBLISH requires a non-zero packet id");
    }
    Writer w;
    w.str(p.topic);
    if (p.qos > 0) {
        w.u16(p.packet_id);
    }
    w.raw(p.payload);
    const auto first = static_cast<std::uint8_t>(0x30 | (p.dup ? 0x08 : 0) | (p.qos << 1) | (p.retain ? 1 : 0));
    return w.finish(first);
}

Bytes encode(const Puback& p) {
    Writer w;
    w.u16(p.packet_id);
    return w.finish(0x40);
}

Bytes encode(const Subscribe& p) {
    if (p.topics.empty()) {
        throw ValidationError("SUBSCRIBE needs at least one topic filter");
    }
    Writer w;
    w.u16(p.packet_id);
    for (const auto& t : p.topics) {
        if (t.qos > 2) {
            throw ValidationError("requested QoS out of range");
        }
        w.str(t.filter);
        w.u8(t.qos);
    }
    return w.finish(0x82);
}

Bytes encode(const Suback& p) {
    Writer w;
    w.u16(p.packet_id);
    for (auto rc : p.return_codes) {
        w.u8(rc);
    }
    return w.finish(0x90);
}

Bytes encode(const Unsubscribe& p) {
    if (p.filters.empty()) {
        throw ValidationError("UNSUBSCRIBE needs at least one topic filter");
    }
    Writer w;
    w.u16(p.packet_id);
    for (const auto& f : p.filters) {
        w.str(f);
    }
    return w.finish(0xA2);
}

Bytes encode(const Unsuback& p) {
    Writer w;
    w.u16(p.packet_id);
    return w.finish(0xB0);
}

Bytes encode(const Pingreq&) { return {0xC0, 0x00}; }
Bytes encode(const Pingresp&) { return {0xD0, 0x00}; }
Bytes encode(const Disconnect&) { return {0xE0, 0x00}; }

Connect decode_connect(std::uint8_t flags, Reader& r) {
    require_flags(flags, 0, "CONNECT");
    Connect p;
    p.protocol_name = r.str();
    p.protocol_level = r.u8();
    const auto connect_flags = r.u8();
    if (connect_flags & 0x01) {
        throw DecodeError(DecodeErrorKind::Malformed, "CONNECT reserved flag set");
    }
    if (connect_flags & 0xFC) {
        throw DecodeError(DecodeErrorKind::Malformed, "will, username and password are not supported");
    }
    p.clean_session = (connect_flags & 0x02) != 0;
    p.keepalive = r.u16();
    p.client_id = r.str();
    r.expect_done("CONNECT");
    return p;
}

Connack decode_connack(std::uint8_t flags, Reader& r) {
    require_flags(flags, 0, "CONNACK");
    Connack p;
    const auto ack_flags = r.u8();
    if (ack_flags & 0xFE) {
        throw DecodeError(DecodeErrorKind::Malformed, "CONNACK reserved flags set");
    }
    p.session_present = (ack_flags & 1) != 0;
    const auto code = r.u8();
    if (code > 5) {
        throw DecodeError(DecodeErrorKind::Malformed, "CONNACK return code out of range");
    }
    p.code = static_cast<ConnectReturn>(code);
    r.expect_done("CONNACK");
    return p;
}

Publish decode_publish(std::uint8_t flags, Reader& r) {
    Publish p;
    p.dup = (flags & 0x08) != 0;
    p.qos = static_cast<std::uint8_t>((flags >> 1) & 0x03);
    p.retain = (flags & 0x01) != 0;
    if (p.qos > 1) {
        throw DecodeError(DecodeErrorKind::Malformed, "QoS 2 is not supported");
    }
    if (p.qos == 0 && p.dup) {
        throw DecodeError(DecodeErrorKind::Malformed, "DUP set on QoS 0 PUBLISH");
    }
    p.topic = r.str();
    if (p.qos > 0) {
        p.packet_id = r.u16();
        if (p.packet_id == 0) {
            throw DecodeError(DecodeErrorKind::Malformed, "packet id 0 on QoS 1 PUBLISH");
        }
    }
    p.payload = r.rest();
    return p;
}

std::uint16_t decode_id_only(std::uint8_t flags, std::uint8_t expected_flags, Reader& r, const char* name) {
    require_flags(flags, expected_flags, name);
    const auto id = r.u16();
    r.expect_done(name);
    return id;
}

Subscribe decode_subscribe(std::uint8_t flags, Reader& r) {
    require_flags(flags, 0x02, "SUBSCRIBE");
    Subscribe p;
    p.packet_id = r.u16();
    while (!r.done()) {
        Subscription s;
        s.filter = r.str();
        s.qos = r.u8();
        if (s.qos > 2) {
            throw DecodeError(DecodeErrorKind::Malformed, "SUBSCRIBE requested QoS out of range");
        }
        p.topics.push_back(std::move(s));
    }
    if (p.topics.empty()) {
        throw DecodeError(DecodeErrorKind::Malformed, "SUBSCRIBE without topic filters");
    }
    return p;
}

Suback decode_suback(std::uint8_t flags, Reader& r) {
    require_flags(flags, 0, "SUBACK");
    Suback p;
    p.packet_id = r.u16();
    while (!r.done()) {
        const auto rc = r.u8();
        if (rc > 2 && rc != kSubackFailure) {
            throw DecodeError(DecodeErrorKind::Malformed, "SUBACK return code out of range");
        }
        p.return_codes.push_back(rc);
    }
    return p;
}

Unsubscribe decode_unsubscribe(std::uint8_t flags, Reader& r) {
    require_flags(flags, 0x02, "UNSUBSCRIBE");
    Unsubscribe p;
    p.packet_id = r.u16();
    while (!r.done()) {
        p.filters.push_back(r.str());
    }
    if (p.filters.empty()) {
        throw DecodeError(DecodeErrorKind::Malformed, "UNSUBSCRIBE without topic filters");
    }
    return p;
}

template <typename T>
T decode_empty(std::uint8_t flags, Reader& r, const char* name) {
    require_flags(flags, 0, name);
    r.expect_done(name);
    return T{};
}

}  // namespace

PacketType packet_type(const Packet& packet) {
    return std::visit(
        [](const auto& p) -> PacketType {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Connect>) return PacketType::Connect;
            else if constexpr (std::is_same_v<T, Connack>) return PacketType::Connack;
            else if constexpr (std::is_same_v<T, Publish>) return PacketType::Publish;
            else if constexpr (std::is_same_v<T, Puback>) return PacketType::Puback;
            else if constexpr (std::is_same_v<T, Subscribe>) return PacketType::Subscribe;
            else if constexpr (std::is_same_v<T, Suback>) return PacketType::Suback;
            else if constexpr (std::is_same_v<T, Unsubscribe>) return PacketType::Unsubscribe;
            else if constexpr (std::is_same_v<T, Unsuback>) return PacketType::Unsuback;
            else if constexpr (std::is_same_v<T, Pingreq>) return PacketType::Pingreq;
            else if constexpr (std::is_same_v<T, Pingresp>) return PacketType::Pingresp;
            else return PacketType::Disconnect;
        },
        packet);
}

const char* packet_name(PacketType type) {
    switch (type) {
        case PacketType::Connect: return "CONNECT";
        case PacketType::Connack: return "CONNACK";
        case PacketType::Publish: return "PUBLISH";
        case PacketType::Puback: return "PUBACK";
        case PacketType::Subscribe: return "SUBSCRIBE";
        case PacketType::Suback: return "SUBACK";
        case PacketType::Unsubscribe: return "UNSUBSCRIBE";
        case PacketType::Unsuback: return "UNSUBACK";
        case PacketType::Pingreq: return "PINGREQ";
        case PacketType::Pingresp: return "PINGRESP";
        case PacketType::Disconnect: return "DISCONNECT";
    }
    return "?";
}

void encode_remaining_length(std::uint32_t value, Bytes& out) {
    if (value > kMaxRemainingLength) {
        throw ValidationError("remaining length out of range");
    }
    do {
        auto digit = static_cast<std::uint8_t>(value % 128);
        value /= 128;
        if (value > 0) {
            digit |= 0x80;
        }
        out.push_back(digit);
    } while (value > 0);
}

std::optional<FrameHeader> peek_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) {
        return std::nullopt;
    }
    std::uint32_t value = 0;
    std::uint32_t multiplier = 1;
    for (std::size_t i = 1; i <= 4; ++i) {
        if (i >= bytes.size()) {
            return std::nullopt;
        }
        const auto digit = bytes[i];
        value += (digit & 0x7F) * multiplier;
        if ((digit & 0x80) == 0) {
            return FrameHeader{i + 1, value};
        }
        multiplier *= 128;
    }
    throw DecodeError(DecodeErrorKind::MalformedRemainingLength, "remaining length longer than 4 bytes");
}

Bytes encode_packet(const Packet& packet) {
    return std::visit([](const auto& p) { return encode(p); }, packet);
}

Packet decode_packet(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) {
        throw DecodeError(DecodeErrorKind::Truncated, "empty buffer");
    }
    const std::uint8_t type = bytes[0] >> 4;
    const std::uint8_t flags = bytes[0] & 0x0F;
    switch (type) {
        case 1: case 2: case 3: case 4: case 8: case 9: case 10: case 11: case 12: case 13: case 14:
            break;
        default:
            throw DecodeError(DecodeErrorKind::UnsupportedType,
                              "unsupported packet type " + std::to_string(type));
    }

    const auto header = peek_frame(bytes);
    if (!header) {
        throw DecodeError(DecodeErrorKind::Truncated, "buffer ends inside the fixed header");
    }
    if (bytes.size() < header->total()) {
        throw DecodeError(DecodeErrorKind::Truncated,
                          "buffer holds " + std::to_string(bytes.size()) + " of " +
                              std::to_string(header->total()) + " bytes");
    }
    if (bytes.size() > header->total()) {
        throw DecodeError(DecodeErrorKind::Malformed, "trailing bytes after packet");
    }
    Reader r(bytes.subspan(header->header_size));

    switch (static_cast<PacketType>(type)) {
        case PacketType::Connect: return decode_connect(flags, r);
        case PacketType::Connack: return decode_connack(flags, r);
        case PacketType::Publish: return decode_publish(flags, r);
        case PacketType::Puback: return Puback{decode_id_only(flags, 0, r, "PUBACK")};
        case PacketType::Subscribe: return decode_subscribe(flags, r);
        case PacketType::Suback: return decode_suback(flags, r);
        case PacketType::Unsubscribe: return decode_unsubscribe(flags, r);
        case PacketType::Unsuback: return Unsuback{decode_id_only(flags, 0, r, "UNSUBACK")};
        case PacketType::Pingreq: return decode_empty<Pingreq>(flags, r, "PINGREQ");
        case PacketType::Pingresp: return decode_empty<Pingresp>(flags, r, "PINGRESP");
        case PacketType::Disconnect: return decode_empty<Disconnect>(flags, r, "DISCONNECT");
    }
    throw DecodeError(DecodeErrorKind::UnsupportedType, "unsupported packet type");
}

}  // namespace teach::bus
