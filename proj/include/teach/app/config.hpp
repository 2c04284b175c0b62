#pragma once

#include "teach/agent/agent.hpp"
#include "teach/bus/schema.hpp"
#include "teach/common/json_util.hpp"
#include "teach/driver/driver.hpp"
#include "teach/driver/replay.hpp"
#include "teach/esn/esn.hpp"
#include "teach/sim/profile.hpp"
#include "teach/sim/route.hpp"
#include "teach/sim/vehicle.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace teach::app {

enum class Mode { GenData, TrainEsn, TrainAgent, Run, Replay };

const char* to_string(Mode mode);
Mode parse_mode(const std::string& text);

/// Where bus traffic goes. `Local` dispatches in-process without sockets,
/// `Embedded` starts a broker on loopback and connects one client per
/// module, `External` connects to `address`.
enum class BrokerKind { Local, Embedded, External };

struct BrokerChoice {
    BrokerKind kind = BrokerKind::Embedded;
    std::string host;
    std::uint16_t port = 1883;
};

/// "local", "embedded" or "tcp://host:port".
BrokerChoice parse_broker(const std::string& text);
std::string to_string(const BrokerChoice& broker);

enum class OverrideTarget { Esn, Driver };

/// An override injected by the run itself at time t, as if sent by the
/// dashboard.
struct ScriptedEvent {
    double t = 0;
    bus::OverrideMsg message;
};

struct GenDataOptions {
    int episodes = 25;
    double hold_min = 20;  // s
    double hold_max = 60;  // s
};

struct TrainEsnOptions {
    std::string data;                  // directory of CSVs or a single CSV
    double validation_fraction = 0.2;  // trailing share of episodes held out
};

struct TrainAgentOptions {
    int episodes = 300;
    /// Agent seeds are drawn from [first_seed, first_seed + episodes).
    std::uint64_t first_episode = 0;
};

struct RunConfig {
    Mode mode = Mode::Run;
    std::uint64_t seed = 0;
    BrokerChoice broker;
    double episode_length = 300;  // s

    sim::RouteSpec route;
    std::optional<std::uint64_t> route_seed;  // defaults to a seed derived from `seed`
    std::array<sim::ProfileParams, 3> profiles = sim::ProfileTable().all();
    sim::VehicleConfig vehicle;
    driver::DriverParams driver;
    double initial_stress = 0;

    esn::EsnConfig esn;
    std::string esn_path;
    double stress_half_life = 2.0;  // s, smoothing of the published estimate

    agent::AgentConfig agent;
    std::string agent_path;
    bool learn_online = false;
    /// Debugging aid: feed the agent the driver's true stress instead of
    /// the ESN estimate.
    bool oracle_stress = false;
    std::optional<sim::ProfileName> fixed_profile;

    OverrideTarget override_target = OverrideTarget::Esn;
    std::vector<ScriptedEvent> events;

    std::optional<std::string> bridge;  // host:port
    bool realtime = false;
    std::string out;  // output path (directory or file, mode dependent)

    GenDataOptions gen_data;
    TrainEsnOptions train_esn;
    TrainAgentOptions train_agent;
    driver::ReplaySource replay;
};

/// Defaults overlaid with `doc`. Unknown keys and mistyped values raise
/// ValidationError naming the key.
RunConfig config_from_json(const json& doc, RunConfig base = {});
json to_json(const RunConfig& config);

/// Mode-dependent checks: required inputs present and readable,
/// fixed_profile and agent path mutually exclusive.
void validate(const RunConfig& config);

RunConfig load_config(const std::string& path, RunConfig base = {});

/// Independent 64-bit seed for (seed, purpose, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t purpose, std::uint64_t index = 0);

namespace purpose {
inline constexpr std::uint32_t kRoute = 1;
inline constexpr std::uint32_t kDriver = 2;
inline constexpr std::uint32_t kSchedule = 3;
inline constexpr std::uint32_t kAgent = 4;
}  // namespace purpose

}  // namespace teach::app
