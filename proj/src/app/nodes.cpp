#include "teach/app/nodes.hpp"

#include <cmath>

namespace teach::app {

std::size_t samples_until_estimate(const esn::EsnConfig& config) {
    return static_cast<std::size_t>(config.washout) + 2;
}

StressNode::StressNode(esn::EsnModel model, double half_life) : estimator_(std::move(model), half_life) {}

std::vector<bus::Envelope> StressNode::on_message(const bus::Envelope& envelope) {
    const auto msg = bus::parse_eda(envelope.payload_json());
    const auto stress = estimator_.push(msg.ts, msg.eda_us);
    if (!stress) return {};
    return {bus::make_envelope(bus::StressMsg{msg.ts, *stress})};
}

long Clock::tick_of(double ts) const { return std::lround(ts / dt); }

AgentNode::AgentNode(agent::Agent& agent, const sim::Route& route, AgentNodeOptions options)
    : agent_(agent), route_(route), options_(options) {}

std::vector<std::string> AgentNode::subscriptions() const {
    return {options_.oracle_stress ? bus::topics::kDriverTruth : bus::topics::kStress, bus::topics::kVehicleState,
            bus::topics::kOverride};
}

std::vector<bus::Envelope> AgentNode::on_message(const bus::Envelope& envelope) {
    const auto& topic = envelope.topic();
    const auto payload = envelope.payload_json();
    if (topic == bus::topics::kStress) {
        const auto msg = bus::parse_stress(payload);
        epoch_.stress.emplace_back(msg.ts, msg.stress);
        return {};
    }
    if (topic == bus::topics::kDriverTruth) {
        const auto msg = bus::parse_truth(payload);
        epoch_.stress.emplace_back(msg.ts, msg.s);
        return {};
    }
    if (topic == bus::topics::kOverride) {
        const auto msg = bus::parse_override(payload);
        if (msg.kind == bus::OverrideKind::Stress && options_.accept_stress_override) {
            if (const auto* v = std::get_if<double>(&msg.value)) {
                if (*v >= 0 && *v <= 1) stress_override_ = *v;
            } else {
                stress_override_.reset();
            }
        }
        return {};
    }
    return on_vehicle(bus::parse_vehicle_state(payload));
}

std::vector<bus::Envelope> AgentNode::on_vehicle(const bus::VehicleStateMsg& msg) {
    sim::VehicleState state;
    state.t = msg.ts;
    state.s_pos = msg.s_pos;
    state.v = msg.v;
    state.a_long = msg.a_long;
    state.a_lat = msg.a_lat;
    state.jerk = msg.jerk;
    state.kappa = msg.kappa;
    epoch_.vehicle.push_back(state);

    const long tick = options_.clock.tick_of(msg.ts);
    if (tick % options_.clock.epoch_ticks != 0) return {};
    const bool terminal = tick >= options_.clock.episode_ticks;

    epoch_.distance = std::max(0.0, msg.s_pos - epoch_start_pos_);
    const double epoch_length = static_cast<double>(options_.clock.epoch_ticks) * options_.clock.dt;
    const double preview = route_.mean_abs_kappa(msg.s_pos, agent_.config().preview);
    agent::EpochSummary effective = epoch_;
    if (stress_override_) effective.stress = {{msg.ts, *stress_override_}};
    auto features = agent::build_features(effective, preview, epoch_length, last_features_);

    DecisionLog log;
    log.ts = msg.ts;
    log.features = features;
    if (!features.stale) {
        log.reward = agent::compute_reward(effective, agent_.config().beta, agent_.config().d_ref);
        if (options_.learn && pending_) {
            const auto r = agent_.learn({pending_->first, pending_->second, *log.reward, features.phi, terminal});
            if (!r.applied) ++skipped_;
        }
    }

    std::vector<bus::Envelope> out;
    if (!terminal) {
        const auto decision = agent_.decide(features.phi, options_.greedy);
        log.action = static_cast<int>(sim::index_of(decision.profile));
        log.probs = decision.probs;
        pending_ = std::make_pair(features.phi, log.action);
        bus::ActionMsg action;
        action.ts = msg.ts;
        action.profile = sim::to_string(decision.profile);
        for (int i = 0; i < agent::kNumActions; ++i) action.probs[static_cast<std::size_t>(i)] = decision.probs(i);
        out.push_back(bus::make_envelope(action));
    } else {
        pending_.reset();
    }
    decisions_.push_back(log);
    last_features_ = features;
    epoch_ = {};
    epoch_start_pos_ = msg.s_pos;
    return out;
}

std::vector<bus::Envelope> FixedPolicyNode::on_message(const bus::Envelope& envelope) {
    const auto msg = bus::parse_vehicle_state(envelope.payload_json());
    const long tick = clock_.tick_of(msg.ts);
    if (tick % clock_.epoch_ticks != 0 || tick >= clock_.episode_ticks) return {};
    bus::ActionMsg action;
    action.ts = msg.ts;
    action.profile = sim::to_string(profile_);
    action.probs[sim::index_of(profile_)] = 1.0;
    return {bus::make_envelope(action)};
}

}  // namespace teach::app
