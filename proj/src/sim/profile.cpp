#include "teach/sim/profile.hpp"

#include "teach/common/error.hpp"

namespace teach::sim {

const char* to_string(ProfileName name) {
    switch (name) {
        case ProfileName::Conservative: return "conservative";
        case ProfileName::Normal: return "normal";
        case ProfileName::Aggressive: return "aggressive";
    }
    return "?";
}

ProfileName parse_profile(std::string_view text) {
    if (text == "conservative") return ProfileName::Conservative;
    if (text == "normal") return ProfileName::Normal;
    if (text == "aggressive") return ProfileName::Aggressive;
    throw ValidationError("unknown driving profile \"" + std::string(text) +
                          "\" (expected conservative, normal or aggressive)");
}

ProfileTable::ProfileTable()
    : ProfileTable({ProfileParams{12.0, 1.5, 2.5, 1.5}, ProfileParams{20.0, 2.5, 4.0, 2.5},
                    ProfileParams{30.0, 4.0, 6.0, 4.0}}) {}

ProfileTable::ProfileTable(const std::array<ProfileParams, 3>& params) : params_(params) {
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& p = params_[i];
        if (!(p.v_max > 0 && p.a_max > 0 && p.a_brake_max > 0 && p.a_lat_max > 0)) {
            throw ValidationError(std::string("profile ") + to_string(kAllProfiles[i]) +
                                  ": all parameters must be strictly positive");
        }
        if (i > 0) {
            const auto& q = params_[i - 1];
            if (q.v_max > p.v_max || q.a_max > p.a_max || q.a_brake_max > p.a_brake_max ||
                q.a_lat_max > p.a_lat_max) {
                throw ValidationError(std::string("profile ") + to_string(kAllProfiles[i - 1]) +
                                      " must not exceed " + to_string(kAllProfiles[i]) + " in any parameter");
            }
        }
    }
}

}  // namespace teach::sim
