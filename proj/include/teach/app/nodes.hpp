#pragma once

#include "teach/agent/agent.hpp"
#include "teach/app/transport.hpp"
#include "teach/bus/schema.hpp"
#include "teach/esn/esn.hpp"
#include "teach/sim/route.hpp"

#include <optional>
#include <vector>

namespace teach::app {

/// Number of eda samples after which the estimator publishes its first
/// value: one sample primes the difference feature, then `washout` more
/// are swallowed.
std::size_t samples_until_estimate(const esn::EsnConfig& config);

/// Streams eda through the ESN and publishes the smoothed stress estimate.
class StressNode : public Node {
public:
    StressNode(esn::EsnModel model, double half_life);

    std::string name() const override { return "stress-esn"; }
    std::vector<std::string> subscriptions() const override { return {bus::topics::kEda}; }
    std::vector<bus::Envelope> on_message(const bus::Envelope& envelope) override;

    const esn::StressEstimator& estimator() const noexcept { return estimator_; }

private:
    esn::StressEstimator estimator_;
};

struct Clock {
    double dt = 0.05;             // s per tick
    long epoch_ticks = 100;       // ticks per decision epoch
    long episode_ticks = 6000;    // ticks per episode
    long tick_of(double ts) const;
};

/// Decision-time statistics, kept for training and evaluation.
struct DecisionLog {
    double ts = 0;
    agent::FeatureVector features;
    int action = 0;
    std::optional<double> reward;  // for the epoch that ended at ts
    agent::Probs probs = agent::Probs::Zero();
};

struct AgentNodeOptions {
    Clock clock;
    bool greedy = true;
    bool learn = false;
    /// When false, stress overrides are left to the driver model.
    bool accept_stress_override = true;
    /// Read stress from teaching/driver/truth instead of the estimator.
    bool oracle_stress = false;
};

/// The driving-style agent: collects stress and vehicle state per epoch and
/// publishes a profile decision at every epoch boundary. The override
/// value, when set, replaces the epoch's stress statistics.
class AgentNode : public Node {
public:
    AgentNode(agent::Agent& agent, const sim::Route& route, AgentNodeOptions options);

    std::string name() const override { return "style-agent"; }
    std::vector<std::string> subscriptions() const override;
    std::vector<bus::Envelope> on_message(const bus::Envelope& envelope) override;

    const std::vector<DecisionLog>& decisions() const noexcept { return decisions_; }
    long skipped_updates() const noexcept { return skipped_; }

private:
    std::vector<bus::Envelope> on_vehicle(const bus::VehicleStateMsg& msg);

    agent::Agent& agent_;
    const sim::Route& route_;
    AgentNodeOptions options_;
    agent::EpochSummary epoch_;
    double epoch_start_pos_ = 0;
    std::optional<double> stress_override_;
    std::optional<agent::FeatureVector> last_features_;
    std::optional<std::pair<agent::Features, int>> pending_;  // last (phi, action) awaiting its reward
    std::vector<DecisionLog> decisions_;
    long skipped_ = 0;
};

/// Stands in for the agent under --fixed-profile: answers every decision
/// point with the same profile and a one-hot distribution.
class FixedPolicyNode : public Node {
public:
    FixedPolicyNode(sim::ProfileName profile, Clock clock) : profile_(profile), clock_(clock) {}

    std::string name() const override { return "fixed-policy"; }
    std::vector<std::string> subscriptions() const override { return {bus::topics::kVehicleState}; }
    std::vector<bus::Envelope> on_message(const bus::Envelope& envelope) override;

private:
    sim::ProfileName profile_;
    Clock clock_;
};

}  // namespace teach::app
