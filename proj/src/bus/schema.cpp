#include "teach/bus/schema.hpp"

#include "teach/common/error.hpp"

namespace teach::bus {
namespace {

std::uint64_t require_seq(const json& j) {
    const auto& v = require(j, "seq");
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ValidationError("field \"seq\" must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

std::string require_string(const json& j, const std::string& key) {
    const auto& v = require(j, key);
    if (!v.is_string()) {
        throw ValidationError("field \"" + key + "\" must be a string");
    }
    return v.get<std::string>();
}

}  // namespace

const char* to_string(OverrideKind kind) {
    switch (kind) {
        case OverrideKind::Stress: return "stress";
        case OverrideKind::Profile: return "profile";
        case OverrideKind::Pause: return "pause";
        case OverrideKind::Resume: return "resume";
    }
    return "?";
}

OverrideKind parse_override_kind(const std::string& text) {
    if (text == "stress") return OverrideKind::Stress;
    if (text == "profile") return OverrideKind::Profile;
    if (text == "pause") return OverrideKind::Pause;
    if (text == "resume") return OverrideKind::Resume;
    throw ValidationError("unknown override kind \"" + text + "\"");
}

json to_json(const EdaMsg& m) { return {{"ts", m.ts}, {"seq", m.seq}, {"eda_uS", m.eda_us}}; }
json to_json(const HrMsg& m) { return {{"ts", m.ts}, {"seq", m.seq}, {"bpm", m.bpm}}; }
json to_json(const AuMsg& m) { return {{"ts", m.ts}, {"seq", m.seq}, {"au", m.au}}; }

json to_json(const VehicleStateMsg& m) {
    return {{"ts", m.ts},       {"seq", m.seq},   {"v", m.v},         {"a_long", m.a_long},
            {"a_lat", m.a_lat}, {"jerk", m.jerk}, {"s_pos", m.s_pos}, {"kappa", m.kappa},
            {"profile", m.profile}};
}

json to_json(const StressMsg& m) { return {{"ts", m.ts}, {"stress", m.stress}}; }
json to_json(const ActionMsg& m) { return {{"ts", m.ts}, {"profile", m.profile}, {"probs", m.probs}}; }
json to_json(const TruthMsg& m) { return {{"ts", m.ts}, {"s", m.s}}; }

json to_json(const OverrideMsg& m) {
    json j = {{"ts", m.ts}, {"kind", to_string(m.kind)}, {"value", nullptr}};
    if (const auto* d = std::get_if<double>(&m.value)) {
        j["value"] = *d;
    } else if (const auto* s = std::get_if<std::string>(&m.value)) {
        j["value"] = *s;
    }
    return j;
}

EdaMsg parse_eda(const json& j) {
    return {require_number(j, "ts"), require_seq(j), require_number(j, "eda_uS")};
}

HrMsg parse_hr(const json& j) {
    return {require_number(j, "ts"), require_seq(j), require_number(j, "bpm")};
}

AuMsg parse_au(const json& j) {
    AuMsg m{require_number(j, "ts"), require_seq(j), {}};
    const auto& au = require(j, "au");
    if (!au.is_object()) {
        throw ValidationError("field \"au\" must be an object");
    }
    for (const auto& [name, value] : au.items()) {
        if (!value.is_number()) {
            throw ValidationError("AU intensity \"" + name + "\" must be a number");
        }
        m.au[name] = value.get<double>();
    }
    return m;
}

VehicleStateMsg parse_vehicle_state(const json& j) {
    VehicleStateMsg m;
    m.ts = require_number(j, "ts");
    m.seq = require_seq(j);
    m.v = require_number(j, "v");
    m.a_long = require_number(j, "a_long");
    m.a_lat = require_number(j, "a_lat");
    m.jerk = require_number(j, "jerk");
    m.s_pos = require_number(j, "s_pos");
    m.kappa = require_number(j, "kappa");
    m.profile = require_string(j, "profile");
    return m;
}

StressMsg parse_stress(const json& j) {
    return {require_number(j, "ts"), require_number(j, "stress")};
}

ActionMsg parse_action(const json& j) {
    ActionMsg m;
    m.ts = require_number(j, "ts");
    m.profile = require_string(j, "profile");
    const auto& probs = require(j, "probs");
    if (!probs.is_array() || probs.size() != 3) {
        throw ValidationError("field \"probs\" must be an array of 3 numbers");
    }
    for (std::size_t i = 0; i < 3; ++i) {
        if (!probs[i].is_number()) {
            throw ValidationError("field \"probs\" must be an array of 3 numbers");
        }
        m.probs[i] = probs[i].get<double>();
    }
    return m;
}

TruthMsg parse_truth(const json& j) {
    return {require_number(j, "ts"), require_number(j, "s")};
}

OverrideMsg parse_override(const json& j) {
    OverrideMsg m;
    m.ts = require_number(j, "ts");
    m.kind = parse_override_kind(require_string(j, "kind"));
    const json value = j.contains("value") ? j.at("value") : json(nullptr);
    switch (m.kind) {
        case OverrideKind::Stress:
            if (value.is_number()) {
                m.value = value.get<double>();
            } else if (!value.is_null()) {
                throw ValidationError("stress override value must be a number or null");
            }
            break;
        case OverrideKind::Profile:
            if (value.is_string()) {
                m.value = value.get<std::string>();
            } else if (!value.is_null()) {
                throw ValidationError("profile override value must be a string or null");
            }
            break;
        case OverrideKind::Pause:
        case OverrideKind::Resume:
            break;
    }
    return m;
}

Envelope make_envelope(const EdaMsg& m) { return Envelope::from_json(topics::kEda, to_json(m)); }
Envelope make_envelope(const HrMsg& m) { return Envelope::from_json(topics::kHr, to_json(m)); }
Envelope make_envelope(const AuMsg& m) { return Envelope::from_json(topics::kAu, to_json(m)); }
Envelope make_envelope(const VehicleStateMsg& m) { return Envelope::from_json(topics::kVehicleState, to_json(m)); }
Envelope make_envelope(const StressMsg& m) { return Envelope::from_json(topics::kStress, to_json(m)); }
Envelope make_envelope(const ActionMsg& m) { return Envelope::from_json(topics::kAction, to_json(m)); }
Envelope make_envelope(const TruthMsg& m) { return Envelope::from_json(topics::kDriverTruth, to_json(m)); }
Envelope make_envelope(const OverrideMsg& m) { return Envelope::from_json(topics::kOverride, to_json(m)); }

}  // namespace teach::bus
