#include "teach/sim/vehicle.hpp"

#include "teach/common/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace teach::sim {

double target_speed(const ProfileParams& params, double kappa) {
    const double k = std::abs(kappa);
    if (k == 0.0) {
        return params.v_max;
    }
    return std::min(params.v_max, std::sqrt(params.a_lat_max / k));
}

StepResult step(const VehicleState& state, const DrivingProfile& profile, const Route& route,
                const VehicleConfig& config, std::optional<double> speed_cap) {
    if (!(config.dt > 0)) {
        throw ValidationError("dt must be positive");
    }
    const auto& p = profile.params;

    // The window's sharpest curve bounds the target.
    double v_tgt = target_speed(p, route.max_abs_kappa(state.s_pos, config.lookahead));
    if (speed_cap) {
        v_tgt = std::min(v_tgt, *speed_cap);
    }

    StepResult out;
    VehicleState& next = out.state;
    next.t = state.t + config.dt;
    next.profile = profile.name;
    next.a_long = std::clamp(config.k_v * (v_tgt - state.v), -p.a_brake_max, p.a_max);
    next.v = std::max(0.0, state.v + next.a_long * config.dt);
    next.s_pos = state.s_pos + next.v * config.dt;
    next.jerk = (next.a_long - state.a_long) / config.dt;
    if (next.s_pos >= route.total_length()) {
        out.route_end = true;
    }
    next.kappa = route.kappa_at(next.s_pos);
    next.a_lat = next.v * next.v * std::abs(next.kappa);
    return out;
}

VehicleSim::VehicleSim(Route route, ProfileTable profiles, VehicleConfig config, ProfileName initial)
    : route_(std::move(route)),
      profiles_(profiles),
      config_(config),
      obstacle_start_(route_.segments().size()) {
    if (!(config_.dt > 0) || !(config_.lookahead >= 0) || !(config_.k_v > 0)) {
        throw ValidationError("vehicle config needs dt > 0, lookahead >= 0 and k_v > 0");
    }
    state_.profile = initial;
    state_.kappa = route_.kappa_at(0.0);
}

void VehicleSim::set_profile(ProfileName name) {
    commands_.push_back(name);
}

void VehicleSim::set_profile(std::string_view name) {
    set_profile(parse_profile(name));
}

std::optional<double> VehicleSim::obstacle_cap() const {
    std::optional<double> cap;
    const auto& segs = route_.segments();
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const auto& start = obstacle_start_[i];
        if (!start || !segs[i].obstacle) {
            continue;
        }
        if (state_.t < *start + segs[i].obstacle->duration) {
            cap = std::min(cap.value_or(segs[i].obstacle->v_forced), segs[i].obstacle->v_forced);
        }
    }
    return cap;
}

void VehicleSim::update_obstacles() {
    const auto& segs = route_.segments();
    const double window_end = state_.s_pos + config_.lookahead;
    for (std::size_t i = route_.segment_at(state_.s_pos); i < segs.size(); ++i) {
        const double start = route_.segment_start(i);
        if (start > window_end) {
            break;
        }
        if (!segs[i].obstacle || obstacle_start_[i]) {
            continue;
        }
        const double at = start + segs[i].obstacle->at;
        if (at >= state_.s_pos && at <= window_end) {
            obstacle_start_[i] = state_.t;
            spdlog::debug("vehicle: obstacle at {:.1f} m active for {:.1f} s (v_forced {:.2f})", at,
                          segs[i].obstacle->duration, segs[i].obstacle->v_forced);
        }
    }
}

bool VehicleSim::step() {
    if (finished_) {
        return false;
    }
    while (!commands_.empty()) {
        const auto name = commands_.front();
        commands_.pop_front();
        if (name != state_.profile) {
            transitions_.push_back({state_.t, state_.profile, name});
            spdlog::debug("vehicle: t={:.2f} profile {} -> {}", state_.t, to_string(state_.profile), to_string(name));
        }
        state_.profile = name;
    }
    update_obstacles();
    auto result = sim::step(state_, profiles_.profile(state_.profile), route_, config_, obstacle_cap());
    state_ = result.state;
    finished_ = result.route_end;
    return true;
}

}  // namespace teach::sim
