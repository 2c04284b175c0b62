#pragma once

#include "teach/sim/profile.hpp"
#include "teach/sim/route.hpp"

#include <deque>
#include <optional>
#include <vector>

namespace teach::sim {

struct VehicleConfig {
    double dt = 0.05;         // s
    double lookahead = 50.0;  // m
    double k_v = 0.5;         // 1/s, proportional speed gain
};

struct VehicleState {
    double t = 0;       // s
    double s_pos = 0;   // m along route
    double v = 0;       // m/s
    double a_long = 0;  // m/s^2
    double a_lat = 0;   // m/s^2, v^2 * |kappa|
    double jerk = 0;    // m/s^3
    double kappa = 0;   // 1/m at s_pos
    ProfileName profile = ProfileName::Normal;
    friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// Curve speed limit: min(v_max, sqrt(a_lat_max / |kappa|)), v_max on a
/// straight.
double target_speed(const ProfileParams& params, double kappa);

/// One controller/plant step. `speed_cap` limits the target (active
/// obstacle). Returns the new state; `route_end` is set when the vehicle
/// passes the end of the route.
struct StepResult {
    VehicleState state;
    bool route_end = false;
};
StepResult step(const VehicleState& state, const DrivingProfile& profile, const Route& route,
                const VehicleConfig& config, std::optional<double> speed_cap = std::nullopt);

struct ProfileTransition {
    double t = 0;
    ProfileName from = ProfileName::Normal;
    ProfileName to = ProfileName::Normal;
};

/// Single-threaded vehicle simulation. Profile commands are queued and
/// applied at the start of the next step.
class VehicleSim {
public:
    VehicleSim(Route route, ProfileTable profiles, VehicleConfig config = {},
               ProfileName initial = ProfileName::Normal);

    const VehicleState& state() const noexcept { return state_; }
    const Route& route() const noexcept { return route_; }
    const VehicleConfig& config() const noexcept { return config_; }
    const ProfileTable& profiles() const noexcept { return profiles_; }
    bool finished() const noexcept { return finished_; }

    void set_profile(ProfileName name);
    /// Parses and queues; throws ValidationError for an unknown name.
    void set_profile(std::string_view name);

    /// Advances one dt. No-op once the route is exhausted; returns false
    /// from then on.
    bool step();

    const std::vector<ProfileTransition>& transitions() const noexcept { return transitions_; }

    /// Speed cap from currently active obstacles, if any.
    std::optional<double> obstacle_cap() const;

private:
    void update_obstacles();

    Route route_;
    ProfileTable profiles_;
    VehicleConfig config_;
    VehicleState state_;
    std::deque<ProfileName> commands_;
    std::vector<ProfileTransition> transitions_;
    // Per segment: activation time of its obstacle (nullopt = not reached).
    std::vector<std::optional<double>> obstacle_start_;
    bool finished_ = false;
};

}  // namespace teach::sim
