#include "teach/bus/envelope.hpp"

#include "teach/bus/topic.hpp"
#include "teach/common/error.hpp"

namespace teach::bus {

Envelope::Envelope(std::string topic, Bytes payload, std::uint8_t qos)
    : topic_(std::move(topic)), payload_(std::move(payload)), qos_(qos) {
    validate_topic(topic_);
    if (payload_.size() > kMaxEnvelopePayload) {
        throw ValidationError("payload of " + std::to_string(payload_.size()) + " bytes exceeds 256 KiB");
    }
    if (qos_ > 1) {
        throw ValidationError("envelope qos must be 0 or 1");
    }
}

Envelope Envelope::from_json(std::string topic, const json& payload, std::uint8_t qos) {
    const auto text = canonical_dump(payload);
    return Envelope(std::move(topic), Bytes(text.begin(), text.end()), qos);
}

json Envelope::payload_json() const {
    try {
        return json::parse(payload_.begin(), payload_.end());
    } catch (const json::parse_error& e) {
        throw ValidationError("payload on " + topic_ + " is not JSON: " + e.what());
    }
}

}  // namespace teach::bus
