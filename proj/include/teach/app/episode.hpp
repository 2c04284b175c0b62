#pragma once

#include "teach/agent/agent.hpp"
#include "teach/app/config.hpp"
#include "teach/app/nodes.hpp"
#include "teach/app/transport.hpp"
#include "teach/esn/esn.hpp"
#include "teach/sim/route.hpp"

#include <array>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace teach::app {

struct RunSummary {
    bool ok = true;
    std::string cause;  // set when a module or the bus failed
    long ticks = 0;     // records written
    double duration = 0;
    double distance = 0;
    bool route_end = false;
    /// Mean oracle stress over each third of the episode length; NaN for a
    /// third the episode never reached.
    std::array<double, 3> stress_thirds{};
    std::array<double, 3> stress_est_thirds{};
    /// Share of decisions per profile (conservative, normal, aggressive).
    std::array<double, 3> action_histogram{};
    long decisions = 0;
    long overrides = 0;
    long esn_faults = 0;
    long agent_faults = 0;
};

json to_json(const RunSummary& summary);

/// Route and driver seed for episode `index` of a run.
struct EpisodeSetup {
    sim::Route route;
    std::uint64_t driver_seed = 0;
};

EpisodeSetup episode_setup(const RunConfig& config, std::uint64_t index = 0);

Clock make_clock(const RunConfig& config);

struct EpisodeOptions {
    /// nullptr runs a fixed policy (config.fixed_profile).
    agent::Agent* agent = nullptr;
    bool greedy = true;
    bool learn = false;
    /// JSONL records, one per tick; nullptr to skip.
    std::ostream* log = nullptr;
    /// Broker to use when config.broker is not Local.
    std::optional<bus::Address> broker;
};

struct EpisodeResult {
    RunSummary summary;
    std::vector<DecisionLog> decisions;
};

/// Runs one closed-loop episode: vehicle, driver and sensors stepped on the
/// orchestrator clock, ESN and agent as bus nodes. Module and bus failures
/// end the episode early and are reported in the summary rather than
/// thrown.
EpisodeResult run_episode(const RunConfig& config, const EpisodeSetup& setup, const esn::EsnModel& esn,
                          const EpisodeOptions& options);

}  // namespace teach::app
