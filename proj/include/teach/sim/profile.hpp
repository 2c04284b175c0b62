#pragma once

#include <array>
#include <string>
#include <string_view>

namespace teach::sim {

enum class ProfileName { Conservative = 0, Normal = 1, Aggressive = 2 };

inline constexpr std::array<ProfileName, 3> kAllProfiles = {ProfileName::Conservative, ProfileName::Normal,
                                                            ProfileName::Aggressive};

const char* to_string(ProfileName name);

/// Throws ValidationError for anything but the three profile names.
ProfileName parse_profile(std::string_view text);

inline std::size_t index_of(ProfileName name) { return static_cast<std::size_t>(name); }

/// Vehicle dynamics limits. "Maximum steering angle" is expressed as the
/// lateral acceleration the vehicle accepts in curves.
struct ProfileParams {
    double v_max = 0;        // m/s
    double a_max = 0;        // m/s^2
    double a_brake_max = 0;  // m/s^2 (magnitude)
    double a_lat_max = 0;    // m/s^2
};

struct DrivingProfile {
    ProfileName name = ProfileName::Normal;
    ProfileParams params;
};

/// Parameters for all three profiles. Construction validates that every
/// value is strictly positive and that the profiles are ordered
/// componentwise conservative <= normal <= aggressive.
class ProfileTable {
public:
    ProfileTable();  // default parameters
    explicit ProfileTable(const std::array<ProfileParams, 3>& params);

    const ProfileParams& params(ProfileName name) const { return params_[index_of(name)]; }
    DrivingProfile profile(ProfileName name) const { return {name, params(name)}; }
    const std::array<ProfileParams, 3>& all() const noexcept { return params_; }

private:
    std::array<ProfileParams, 3> params_;
};

}  // namespace teach::sim
