#include "teach/driver/driver.hpp"

#include "teach/common/error.hpp"

#include <algorithm>
#include <cmath>

namespace teach::driver {
namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
    return std::mt19937_64(seq);
}

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

void validate(const DriverParams& p) {
    const bool positive = p.a_ref > 0 && p.l_ref > 0 && p.j_ref > 0 && p.v_ref > 0 && p.tau_up > 0 &&
                          p.tau_down > 0 && p.tau_rise > 0 && p.tau_decay > p.tau_rise && p.eda_rate > 0 &&
                          p.eda_base > 0;
    if (!positive) {
        throw ValidationError("driver references, time constants and eda rate must be positive, tau_decay > tau_rise");
    }
    const bool non_negative = p.w.accel >= 0 && p.w.lateral >= 0 && p.w.jerk >= 0 && p.w.speed >= 0 &&
                              p.k_tonic >= 0 && p.scr_rate0 >= 0 && p.scr_rate1 >= 0 && p.scr_amp >= 0 &&
                              p.sigma_eda >= 0 && p.sigma_hr >= 0 && p.sigma_au >= 0 && p.k_au >= 0 &&
                              p.v_comf >= 0;
    if (!non_negative) {
        throw ValidationError("driver weights, rates and noise levels must be non-negative");
    }
}

double compute_load(const DriverParams& p, const sim::VehicleState& v) {
    const double raw = p.w.accel * std::abs(v.a_long) / p.a_ref + p.w.lateral * v.a_lat / p.l_ref +
                       p.w.jerk * std::abs(v.jerk) / p.j_ref + p.w.speed * std::max(0.0, v.v - p.v_comf) / p.v_ref;
    return clip01(raw);
}

DriverStep driver_step(const DriverState& state, const DriverParams& p, const sim::VehicleState& vehicle,
                       double dt) {
    DriverStep out{state, compute_load(p, vehicle)};
    const double s = state.s;
    out.state.s = clip01(s + dt * (out.load * (1.0 - s) / p.tau_up - s / p.tau_down));
    out.state.tonic = p.eda_base + p.k_tonic * out.state.s;
    return out;
}

double scr_kernel(const Scr& scr, double t, double tau_rise, double tau_decay) {
    const double age = t - scr.t0;
    if (age <= 0) {
        return 0.0;
    }
    return scr.amplitude * (std::exp(-age / tau_decay) - std::exp(-age / tau_rise));
}

const char* to_string(SensorKind kind) {
    switch (kind) {
        case SensorKind::Eda:
            return "eda";
        case SensorKind::Hr:
            return "hr";
        case SensorKind::Au:
            return "au";
    }
    return "?";
}

Driver::Driver(DriverParams params, std::uint64_t seed, double initial_stress)
    : params_(params), eda_rng_(stream(seed, 1)), hr_rng_(stream(seed, 2)), au_rng_(stream(seed, 3)) {
    validate(params_);
    set_stress(initial_stress);
}

double Driver::step(const sim::VehicleState& vehicle, double dt) {
    if (!(dt > 0)) {
        throw ValidationError("driver dt must be positive");
    }
    auto next = driver_step(state_, params_, vehicle, dt);
    state_ = std::move(next.state);
    return next.load;
}

void Driver::set_stress(double s) {
    if (!std::isfinite(s)) {
        throw ValidationError("stress must be finite");
    }
    state_.s = clip01(s);
    state_.tonic = params_.eda_base + params_.k_tonic * state_.s;
}

SensorSample Driver::emit_eda(double t) {
    const auto& p = params_;
    double phasic = 0;
    for (const auto& scr : state_.scrs) {
        phasic += scr_kernel(scr, t, p.tau_rise, p.tau_decay);
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double noise = p.sigma_eda * gauss(eda_rng_);
    const double eda = std::max(kEdaFloor, state_.tonic + phasic + noise);

    // Drop responses that are past their peak and have decayed away.
    const double t_peak = p.tau_rise * p.tau_decay / (p.tau_decay - p.tau_rise) * std::log(p.tau_decay / p.tau_rise);
    std::erase_if(state_.scrs, [&](const Scr& scr) {
        return t - scr.t0 > t_peak && scr_kernel(scr, t, p.tau_rise, p.tau_decay) < 1e-4;
    });

    const double rate = p.scr_rate0 + p.scr_rate1 * state_.s;
    std::poisson_distribution<int> spawn(rate / p.eda_rate);
    const int count = rate > 0 ? spawn(eda_rng_) : 0;
    for (int i = 0; i < count; ++i) {
        state_.scrs.push_back({t, p.scr_amp * (1.0 + state_.s)});
    }
    return {t, SensorKind::Eda, {{"eda_uS", eda}}};
}

SensorSample Driver::emit_hr(double t) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double bpm = 60.0 + 40.0 * state_.s + params_.sigma_hr * gauss(hr_rng_);
    return {t, SensorKind::Hr, {{"bpm", std::clamp(bpm, kHrMin, kHrMax)}}};
}

SensorSample Driver::emit_au(double t) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    SensorSample out{t, SensorKind::Au, {}};
    for (std::size_t i = 0; i < kAuNames.size(); ++i) {
        const double drive = kAuStressLinked[i] ? params_.k_au * state_.s * kAuMax : 0.0;
        out.values[kAuNames[i]] = std::clamp(drive + params_.sigma_au * gauss(au_rng_), 0.0, kAuMax);
    }
    return out;
}

}  // namespace teach::driver
