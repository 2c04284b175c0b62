#include "teach/bus/packet.hpp"
#include "teach/common/error.hpp"

#include "packet_gen.hpp"

#include <gtest/gtest.h>

namespace teach::bus {
namespace {

TEST(PacketCodec, PingreqWireBytes) {
    EXPECT_EQ(encode_packet(Pingreq{}), (Bytes{0xC0, 0x00}));
    EXPECT_EQ(encode_packet(Pingresp{}), (Bytes{0xD0, 0x00}));
    EXPECT_EQ(encode_packet(Disconnect{}), (Bytes{0xE0, 0x00}));
}

TEST(PacketCodec, PublishRoundTrip) {
    Publish p;
    p.topic = "a/b";
    p.qos = 1;
    p.packet_id = 7;
    p.payload = {'x'};
    const auto bytes = encode_packet(p);
    // 0x32: PUBLISH, QoS 1; remaining 2+3 (topic) + 2 (id) + 1 (payload)
    EXPECT_EQ(bytes, (Bytes{0x32, 0x08, 0x00, 0x03, 'a', '/', 'b', 0x00, 0x07, 'x'}));
    EXPECT_EQ(std::get<Publish>(decode_packet(bytes)), p);
}

TEST(PacketCodec, ConnectMatchesStandardLayout) {
    Connect c;
    c.client_id = "ab";
    c.keepalive = 60;
    EXPECT_EQ(encode_packet(c), (Bytes{0x10, 0x0E, 0x00, 0x04, 'M', 'Q', 'T', 'T', 0x04, 0x02, 0x00, 0x3C, 0x00,
                                       0x02, 'a', 'b'}));
}

TEST(PacketCodec, RemainingLengthBoundaries) {
    const std::vector<std::pair<std::uint32_t, Bytes>> cases = {
        {0, {0x00}},
        {127, {0x7F}},
        {128, {0x80, 0x01}},
        {16383, {0xFF, 0x7F}},
        {16384, {0x80, 0x80, 0x01}},
        {2097151, {0xFF, 0xFF, 0x7F}},
        {2097152, {0x80, 0x80, 0x80, 0x01}},
        {268435455, {0xFF, 0xFF, 0xFF, 0x7F}},
    };
    for (const auto& [value, expected] : cases) {
        Bytes out;
        encode_remaining_length(value, out);
        EXPECT_EQ(out, expected) << value;
        Bytes frame{0x30};
        frame.insert(frame.end(), out.begin(), out.end());
        const auto header = peek_frame(frame);
        ASSERT_TRUE(header.has_value());
        EXPECT_EQ(header->remaining_length, value);
        EXPECT_EQ(header->header_size, 1 + expected.size());
    }
    Bytes out;
    EXPECT_THROW(encode_remaining_length(268435456, out), ValidationError);
}

TEST(PacketCodec, DistinctDecodeErrors) {
    auto kind_of = [](Bytes b) {
        try {
            decode_packet(b);
        } catch (const DecodeError& e) {
            return e.kind();
        }
        ADD_FAILURE() << "no error";
        return DecodeErrorKind::Malformed;
    };
    EXPECT_EQ(kind_of({0xF0, 0x00}), DecodeErrorKind::UnsupportedType);
    EXPECT_EQ(kind_of({0x00, 0x00}), DecodeErrorKind::UnsupportedType);
    EXPECT_EQ(kind_of({0x50, 0x02, 0x00, 0x01}), DecodeErrorKind::UnsupportedType);  // PUBREC (QoS 2)
    EXPECT_EQ(kind_of({0x30, 0xFF, 0xFF, 0xFF, 0xFF, 0x01}), DecodeErrorKind::MalformedRemainingLength);
    EXPECT_EQ(kind_of({0x30, 0x05, 0x00, 0x01, 'a'}), DecodeErrorKind::Truncated);
    EXPECT_EQ(kind_of({0x30, 0x80}), DecodeErrorKind::Truncated);
    EXPECT_EQ(kind_of({}), DecodeErrorKind::Truncated);
    EXPECT_EQ(kind_of({0xC0, 0x01, 0x00}), DecodeErrorKind::Malformed);      // PINGREQ with body
    EXPECT_EQ(kind_of({0x80, 0x02, 0x00, 0x01}), DecodeErrorKind::Malformed);  // SUBSCRIBE bad flags
    EXPECT_EQ(kind_of({0x34, 0x05, 0x00, 0x01, 'a', 0x00, 0x01}), DecodeErrorKind::Malformed);  // QoS 2
    EXPECT_EQ(kind_of({0x38, 0x03, 0x00, 0x01, 'a'}), DecodeErrorKind::Malformed);  // DUP on QoS 0
}

TEST(PacketCodec, PeekFrameNeedsMoreBytes) {
    EXPECT_FALSE(peek_frame(Bytes{}).has_value());
    EXPECT_FALSE(peek_frame(Bytes{0x30}).has_value());
    EXPECT_FALSE(peek_frame(Bytes{0x30, 0x80}).has_value());
}

TEST(PacketCodec, EncoderRejectsUnrepresentablePackets) {
    Publish p;
    p.topic = "a";
    p.qos = 2;
    EXPECT_THROW(encode_packet(p), ValidationError);
    p.qos = 1;
    p.packet_id = 0;
    EXPECT_THROW(encode_packet(p), ValidationError);
    p.qos = 0;
    p.dup = true;
    EXPECT_THROW(encode_packet(p), ValidationError);
    EXPECT_THROW(encode_packet(Subscribe{1, {}}), ValidationError);
}

TEST(PacketCodec, RandomisedRoundTrip) {
    std::mt19937_64 rng(20240611);
    for (int i = 0; i < 1000; ++i) {
        const Packet p = testing_support::random_packet(rng);
        const auto bytes = encode_packet(p);
        const Packet back = decode_packet(bytes);
        ASSERT_EQ(back, p) << "iteration " << i << " type " << packet_name(packet_type(p));
        ASSERT_EQ(encode_packet(back), bytes);
    }
}

}  // namespace
}  // namespace teach::bus
