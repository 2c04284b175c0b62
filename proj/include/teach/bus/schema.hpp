#pragma once

// Topic names and JSON payload layouts shared by every module. All
// payloads carry "ts" (seconds); sensor and vehicle payloads also carry a
// per-publisher monotone "seq".

#include "teach/bus/envelope.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>

namespace teach::bus::topics {

inline constexpr const char* kEda = "teaching/sensors/eda";
inline constexpr const char* kHr = "teaching/sensors/hr";
inline constexpr const char* kAu = "teaching/sensors/au";
inline constexpr const char* kVehicleState = "teaching/vehicle/state";
inline constexpr const char* kStress = "teaching/lm/stress";
inline constexpr const char* kAction = "teaching/lm/action";
inline constexpr const char* kDriverTruth = "teaching/driver/truth";
inline constexpr const char* kOverride = "teaching/ui/override";

inline constexpr const char* kAll = "teaching/#";
inline constexpr const char* kSensors = "teaching/sensors/#";
inline constexpr const char* kUi = "teaching/ui/#";

}  // namespace teach::bus::topics

namespace teach::bus {

struct EdaMsg {
    double ts = 0;
    std::uint64_t seq = 0;
    double eda_us = 0;
};

struct HrMsg {
    double ts = 0;
    std::uint64_t seq = 0;
    double bpm = 0;
};

struct AuMsg {
    double ts = 0;
    std::uint64_t seq = 0;
    std::map<std::string, double> au;
};

struct VehicleStateMsg {
    double ts = 0;
    std::uint64_t seq = 0;
    double v = 0;
    double a_long = 0;
    double a_lat = 0;
    double jerk = 0;
    double s_pos = 0;
    double kappa = 0;
    std::string profile;
};

struct StressMsg {
    double ts = 0;
    double stress = 0;
};

struct ActionMsg {
    double ts = 0;
    std::string profile;
    std::array<double, 3> probs{};
};

struct TruthMsg {
    double ts = 0;
    double s = 0;
};

enum class OverrideKind { Stress, Profile, Pause, Resume };

/// A human override. A null value on "stress" or "profile" clears that
/// override.
struct OverrideMsg {
    double ts = 0;
    OverrideKind kind = OverrideKind::Stress;
    std::variant<std::monostate, double, std::string> value;
};

const char* to_string(OverrideKind kind);
OverrideKind parse_override_kind(const std::string& text);

json to_json(const EdaMsg& m);
json to_json(const HrMsg& m);
json to_json(const AuMsg& m);
json to_json(const VehicleStateMsg& m);
json to_json(const StressMsg& m);
json to_json(const ActionMsg& m);
json to_json(const TruthMsg& m);
json to_json(const OverrideMsg& m);

// Parsers throw ValidationError on missing or mistyped fields.
EdaMsg parse_eda(const json& j);
HrMsg parse_hr(const json& j);
AuMsg parse_au(const json& j);
VehicleStateMsg parse_vehicle_state(const json& j);
StressMsg parse_stress(const json& j);
ActionMsg parse_action(const json& j);
TruthMsg parse_truth(const json& j);
OverrideMsg parse_override(const json& j);

Envelope make_envelope(const EdaMsg& m);
Envelope make_envelope(const HrMsg& m);
Envelope make_envelope(const AuMsg& m);
Envelope make_envelope(const VehicleStateMsg& m);
Envelope make_envelope(const StressMsg& m);
Envelope make_envelope(const ActionMsg& m);
Envelope make_envelope(const TruthMsg& m);
Envelope make_envelope(const OverrideMsg& m);

}  // namespace teach::bus
