#pragma once

#include "teach/sim/vehicle.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace teach::driver {

struct LoadWeights {
    double accel = 0.3;
    double lateral = 0.3;
    double jerk = 0.2;
    double speed = 0.2;
};

struct DriverParams {
    LoadWeights w;
    double a_ref = 2.0;   // m/s^2
    double l_ref = 2.0;   // m/s^2
    double j_ref = 4.0;   // m/s^3
    double v_comf = 15.0; // m/s
    double v_ref = 10.0;  // m/s
    double tau_up = 10.0;   // s
    double tau_down = 40.0; // s

    double eda_base = 2.0;   // uS
    double k_tonic = 4.0;    // uS per unit stress
    double scr_rate0 = 0.05; // Hz
    double scr_rate1 = 0.4;  // Hz per unit stress
    double scr_amp = 0.3;    // uS, scaled by (1 + s)
    double tau_rise = 0.75;  // s
    double tau_decay = 4.0;  // s
    double sigma_eda = 0.02; // uS
    double eda_rate = 4.0;   // Hz

    double sigma_hr = 2.0;  // bpm
    double k_au = 0.8;
    double sigma_au = 0.2;
};

/// Throws ValidationError when a time constant, reference or rate is not
/// positive or a noise level is negative.
void validate(const DriverParams& params);

struct Scr {
    double t0 = 0;         // s
    double amplitude = 0;  // uS
    friend bool operator==(const Scr&, const Scr&) = default;
};

struct DriverState {
    double s = 0;      // latent stress in [0, 1]
    double tonic = 2;  // uS, eda_base + k_tonic * s
    std::vector<Scr> scrs;
    friend bool operator==(const DriverState&, const DriverState&) = default;
};

/// Normalized driving load in [0, 1].
double compute_load(const DriverParams& params, const sim::VehicleState& vehicle);

struct DriverStep {
    DriverState state;
    double load = 0;
};

/// Stress update for one tick. Pure.
DriverStep driver_step(const DriverState& state, const DriverParams& params, const sim::VehicleState& vehicle,
                       double dt);

/// Bi-exponential SCR kernel; zero before onset.
double scr_kernel(const Scr& scr, double t, double tau_rise, double tau_decay);

enum class SensorKind { Eda, Hr, Au };

const char* to_string(SensorKind kind);

struct SensorSample {
    double ts = 0;
    SensorKind kind = SensorKind::Eda;
    std::map<std::string, double> values;  // eda_uS | bpm | AU01..AU23
    friend bool operator==(const SensorSample&, const SensorSample&) = default;
};

inline constexpr std::array<const char*, 5> kAuNames = {"AU01", "AU04", "AU07", "AU15", "AU23"};
inline constexpr std::array<bool, 5> kAuStressLinked = {false, true, true, false, true};

inline constexpr double kHrMin = 30.0;
inline constexpr double kHrMax = 220.0;
inline constexpr double kAuMax = 5.0;
inline constexpr double kEdaFloor = 0.01;  // uS

/// Synthetic driver: latent stress plus EDA, HR and AU emitters. Each
/// stream draws from its own generator so that changing one emission rate
/// does not perturb the others.
class Driver {
public:
    Driver(DriverParams params, std::uint64_t seed, double initial_stress = 0.0);

    const DriverState& state() const noexcept { return state_; }
    const DriverParams& params() const noexcept { return params_; }

    /// Advances stress by dt under the given vehicle state; returns load.
    double step(const sim::VehicleState& vehicle, double dt);

    /// Forces the latent stress (used by the driver-directed override).
    void set_stress(double s);

    /// Call on the eda grid (every 1 / eda_rate s). Spawns new SCRs after
    /// reading the current value; their onset is t, so they contribute
    /// nothing to this sample.
    SensorSample emit_eda(double t);
    SensorSample emit_hr(double t);
    SensorSample emit_au(double t);

private:
    DriverParams params_;
    DriverState state_;
    std::mt19937_64 eda_rng_;
    std::mt19937_64 hr_rng_;
    std::mt19937_64 au_rng_;
};

}  // namespace teach::driver
