#include "teach/app/episode.hpp"

#include "teach/app/pipelines.hpp"
#include "teach/driver/driver.hpp"
#include "teach/sim/vehicle.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

namespace teach::app {
namespace {

using namespace std::chrono_literals;

constexpr auto kReplyTimeout = 10s;

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class Orchestrator {
public:
    Orchestrator(const RunConfig& config, const EpisodeSetup& setup, const esn::EsnModel& esn, Transport& transport,
                 std::ostream* log)
        : config_(config),
          clock_(make_clock(config)),
          sim_(setup.route, sim::ProfileTable(config.profiles), config.vehicle,
               config.fixed_profile.value_or(sim::ProfileName::Normal)),
          driver_(config.driver, setup.driver_seed, config.initial_stress),
          transport_(transport),
          log_(log),
          estimate_after_(samples_until_estimate(esn.config)),
          agent_profile_(sim_.state().profile) {
        eda_ticks_ = ticks_per_period(config.driver.eda_rate, config.vehicle.dt);
        hr_ticks_ = ticks_per_period(kHrRate, config.vehicle.dt);
        au_ticks_ = ticks_per_period(kAuRate, config.vehicle.dt);
        const double third = config.episode_length / 3.0;
        thirds_ = {third, 2 * third};
    }

    RunSummary run() {
        const auto wall_start = std::chrono::steady_clock::now();
        auto paced_from = wall_start;
        double paced_t = 0;
        try {
            for (long k = 0; k <= clock_.episode_ticks; ++k) {
                const double t = round9(static_cast<double>(k) * clock_.dt);
                tick_overrides_ = json::array();
                drain();
                fire_due_events(t);
                if (paused_) {
                    wait_for_resume();
                    paced_from = std::chrono::steady_clock::now();
                    paced_t = t;
                }
                if (config_.realtime) {
                    std::this_thread::sleep_until(paced_from + std::chrono::duration<double>(t - paced_t));
                }
                tick(k, t);
                if (k == clock_.episode_ticks) break;
                if (!sim_.step()) {
                    summary_.route_end = true;
                    break;
                }
                driver_.step(sim_.state(), clock_.dt);
            }
        } catch (const std::exception& e) {
            summary_.ok = false;
            summary_.cause = e.what();
            spdlog::error("episode stopped: {}", e.what());
        }
        finish();
        return summary_;
    }

private:
    void tick(long k, double t) {
        if (k % eda_ticks_ == 0) {
            const auto eda = driver_.emit_eda(t);
            latest_eda_ = eda.values.at("eda_uS");
            transport_.publish(bus::make_envelope(bus::EdaMsg{t, eda_seq_++, latest_eda_}));
            transport_.publish(bus::make_envelope(bus::TruthMsg{t, driver_.state().s}));
            if (eda_seq_ >= estimate_after_) {
                await([&] { return stress_ && clock_.tick_of(stress_->ts) == k; }, "stress estimate", t);
            }
        }
        if (k % hr_ticks_ == 0) {
            const auto hr = driver_.emit_hr(t);
            latest_hr_ = hr.values.at("bpm");
            transport_.publish(bus::make_envelope(bus::HrMsg{t, hr_seq_++, latest_hr_}));
        }
        if (k % au_ticks_ == 0) {
            const auto au = driver_.emit_au(t);
            latest_au_ = au.values;
            transport_.publish(bus::make_envelope(bus::AuMsg{t, au_seq_++, latest_au_}));
        }

        const auto& s = sim_.state();
        bus::VehicleStateMsg vs;
        vs.ts = t;
        vs.seq = state_seq_++;
        vs.v = s.v;
        vs.a_long = s.a_long;
        vs.a_lat = s.a_lat;
        vs.jerk = s.jerk;
        vs.s_pos = s.s_pos;
        vs.kappa = s.kappa;
        vs.profile = sim::to_string(s.profile);
        transport_.publish(bus::make_envelope(vs));

        json action = nullptr;
        if (k % clock_.epoch_ticks == 0 && k < clock_.episode_ticks) {
            await([&] { return action_ && clock_.tick_of(action_->ts) == k; }, "profile decision", t);
            agent_profile_ = sim::parse_profile(action_->profile);
            if (!profile_override_) sim_.set_profile(agent_profile_);
            ++decision_counts_[sim::index_of(agent_profile_)];
            action = bus::to_json(*action_);
            action.erase("ts");
        }

        const double truth = driver_.state().s;
        accumulate(t, truth);
        if (log_) {
            json rec = {{"t", t},
                        {"vehicle",
                         {{"v", s.v},
                          {"a_long", s.a_long},
                          {"a_lat", s.a_lat},
                          {"jerk", s.jerk},
                          {"s_pos", s.s_pos},
                          {"kappa", s.kappa},
                          {"profile", sim::to_string(s.profile)}}},
                        {"driver", {{"s", truth}}},
                        {"sensors",
                         {{"eda", latest_eda_},
                          {"hr", hr_seq_ ? json(latest_hr_) : json(nullptr)},
                          {"au", au_seq_ ? json(latest_au_) : json(nullptr)}}},
                        {"stress_est", stress_ ? json(stress_->stress) : json(nullptr)},
                        {"action", action},
                        {"overrides", tick_overrides_}};
            *log_ << canonical_dump(rec) << '\n';
        }
        summary_.ticks += 1;
        summary_.duration = t;
        summary_.distance = s.s_pos;
    }

    template <class Done>
    void await(Done done, const char* what, double t) {
        const auto deadline = std::chrono::steady_clock::now() + kReplyTimeout;
        while (!done()) {
            auto env = transport_.receive(transport_.synchronous() ? 0ms : 50ms);
            if (env) {
                handle(*env);
                continue;
            }
            if (transport_.synchronous() || std::chrono::steady_clock::now() > deadline) {
                throw RuntimeFault(std::string("no ") + what + " on the bus for t=" + std::to_string(t));
            }
        }
    }

    void drain() {
        while (auto env = transport_.receive(0ms)) handle(*env);
    }

    void handle(const bus::Envelope& env) {
        const auto payload = env.payload_json();
        if (env.topic() == bus::topics::kStress) {
            stress_ = bus::parse_stress(payload);
        } else if (env.topic() == bus::topics::kAction) {
            action_ = bus::parse_action(payload);
        } else if (env.topic() == bus::topics::kOverride) {
            try {
                apply_override(bus::parse_override(payload), payload);
            } catch (const ValidationError& e) {
                spdlog::warn("ignoring override: {}", e.what());
            }
        }
    }

    void apply_override(const bus::OverrideMsg& msg, const json& payload) {
        switch (msg.kind) {
            case bus::OverrideKind::Stress:
                if (const auto* v = std::get_if<double>(&msg.value)) {
                    if (!(*v >= 0 && *v <= 1)) throw ValidationError("stress override outside [0, 1]");
                    if (config_.override_target == OverrideTarget::Driver) driver_.set_stress(*v);
                }
                break;
            case bus::OverrideKind::Profile:
                if (const auto* name = std::get_if<std::string>(&msg.value)) {
                    profile_override_ = sim::parse_profile(*name);
                    sim_.set_profile(*profile_override_);
                } else {
                    profile_override_.reset();
                    sim_.set_profile(agent_profile_);
                }
                break;
            case bus::OverrideKind::Pause:
                paused_ = true;
                break;
            case bus::OverrideKind::Resume:
                paused_ = false;
                break;
        }
        tick_overrides_.push_back(payload);
        ++summary_.overrides;
        if (pending_echo_ && *pending_echo_ == payload) pending_echo_.reset();
    }

    void fire(const ScriptedEvent& ev, double t) {
        auto msg = ev.message;
        msg.ts = t;
        const auto env = bus::make_envelope(msg);
        pending_echo_ = env.payload_json();
        transport_.publish(env);
        await([&] { return !pending_echo_; }, "override echo", t);
    }

    void fire_due_events(double t) {
        while (next_event_ < config_.events.size() && config_.events[next_event_].t <= t + 1e-9) {
            fire(config_.events[next_event_++], t);
        }
    }

    void wait_for_resume() {
        const double t = summary_.duration;
        while (paused_) {
            if (next_event_ < config_.events.size()) {
                fire(config_.events[next_event_++], round9(t));
                continue;
            }
            if (transport_.synchronous()) {
                throw RuntimeFault("paused with no source of a resume command");
            }
            if (auto env = transport_.receive(100ms)) handle(*env);
        }
    }

    void accumulate(double t, double truth) {
        const std::size_t third = t < thirds_[0] ? 0 : (t < thirds_[1] ? 1 : 2);
        truth_sum_[third] += truth;
        truth_n_[third] += 1;
        if (stress_) {
            est_sum_[third] += stress_->stress;
            est_n_[third] += 1;
        }
    }

    void finish() {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        long total = 0;
        for (long c : decision_counts_) total += c;
        for (std::size_t i = 0; i < 3; ++i) {
            summary_.stress_thirds[i] = truth_n_[i] ? truth_sum_[i] / static_cast<double>(truth_n_[i]) : nan;
            summary_.stress_est_thirds[i] = est_n_[i] ? est_sum_[i] / static_cast<double>(est_n_[i]) : nan;
            summary_.action_histogram[i] =
                total ? static_cast<double>(decision_counts_[i]) / static_cast<double>(total) : 0.0;
        }
        summary_.decisions = total;
    }

    const RunConfig& config_;
    Clock clock_;
    sim::VehicleSim sim_;
    driver::Driver driver_;
    Transport& transport_;
    std::ostream* log_;
    std::size_t estimate_after_;

    int eda_ticks_ = 5;
    int hr_ticks_ = 20;
    int au_ticks_ = 4;
    std::uint64_t eda_seq_ = 0, hr_seq_ = 0, au_seq_ = 0, state_seq_ = 0;
    double latest_eda_ = 0;
    double latest_hr_ = 0;
    std::map<std::string, double> latest_au_;

    std::optional<bus::StressMsg> stress_;
    std::optional<bus::ActionMsg> action_;
    sim::ProfileName agent_profile_;
    std::optional<sim::ProfileName> profile_override_;
    bool paused_ = false;
    std::size_t next_event_ = 0;
    std::optional<json> pending_echo_;
    json tick_overrides_ = json::array();

    std::array<double, 2> thirds_{};
    std::array<double, 3> truth_sum_{}, est_sum_{};
    std::array<long, 3> truth_n_{}, est_n_{};
    std::array<long, 3> decision_counts_{};
    RunSummary summary_;
};

}  // namespace

json to_json(const RunSummary& s) {
    json thirds = json::array(), est = json::array();
    for (std::size_t i = 0; i < 3; ++i) {
        thirds.push_back(nullable(s.stress_thirds[i]));
        est.push_back(nullable(s.stress_est_thirds[i]));
    }
    json hist = json::object();
    for (auto p : sim::kAllProfiles) hist[sim::to_string(p)] = s.action_histogram[sim::index_of(p)];
    return {{"status", s.ok ? "ok" : "fault"},
            {"cause", s.ok ? json(nullptr) : json(s.cause)},
            {"ticks", s.ticks},
            {"duration", s.duration},
            {"distance", s.distance},
            {"route_end", s.route_end},
            {"stress_thirds", thirds},
            {"stress_est_thirds", est},
            {"action_histogram", hist},
            {"decisions", s.decisions},
            {"overrides", s.overrides},
            {"esn_faults", s.esn_faults},
            {"agent_faults", s.agent_faults}};
}

Clock make_clock(const RunConfig& config) {
    Clock c;
    c.dt = config.vehicle.dt;
    const double epoch = config.agent.epoch;
    c.epoch_ticks = std::lround(epoch / c.dt);
    c.episode_ticks = std::lround(config.episode_length / c.dt);
    if (c.epoch_ticks < 1 || std::abs(static_cast<double>(c.epoch_ticks) * c.dt - epoch) > 1e-9 * epoch) {
        throw ValidationError("agent epoch must be a whole number of simulation ticks");
    }
    if (std::abs(static_cast<double>(c.episode_ticks) * c.dt - config.episode_length) > 1e-9 * config.episode_length) {
        throw ValidationError("episode_length must be a whole number of simulation ticks");
    }
    return c;
}

EpisodeSetup episode_setup(const RunConfig& config, std::uint64_t index) {
    const auto route_seed = config.route_seed ? *config.route_seed + index
                                              : derive_seed(config.seed, purpose::kRoute, index);
    return {sim::make_route(route_seed, config.route), derive_seed(config.seed, purpose::kDriver, index)};
}

EpisodeResult run_episode(const RunConfig& config, const EpisodeSetup& setup, const esn::EsnModel& esn,
                          const EpisodeOptions& options) {
    const Clock clock = make_clock(config);
    auto stress = std::make_shared<StressNode>(esn, config.stress_half_life);
    std::shared_ptr<AgentNode> agent_node;
    std::vector<std::shared_ptr<Node>> nodes{stress};
    if (options.agent) {
        AgentNodeOptions o;
        o.clock = clock;
        o.greedy = options.greedy;
        o.learn = options.learn;
        o.accept_stress_override = config.override_target == OverrideTarget::Esn;
        o.oracle_stress = config.oracle_stress;
        agent_node = std::make_shared<AgentNode>(*options.agent, setup.route, o);
        nodes.push_back(agent_node);
    } else {
        if (!config.fixed_profile) throw ValidationError("an episode needs an agent or a fixed profile");
        nodes.push_back(std::make_shared<FixedPolicyNode>(*config.fixed_profile, clock));
    }
    const std::vector<std::string> inbox{bus::topics::kStress, bus::topics::kAction, bus::topics::kOverride};

    std::unique_ptr<Transport> transport;
    if (config.broker.kind == BrokerKind::Local) {
        transport = std::make_unique<LocalTransport>(nodes, inbox);
    } else {
        if (!options.broker) throw ValidationError("no broker address for a networked episode");
        transport = std::make_unique<MqttTransport>(*options.broker, nodes, inbox);
    }

    const long agent_faults_before = options.agent ? options.agent->faults() : 0;
    EpisodeResult result;
    {
        Orchestrator orchestrator(config, setup, esn, *transport, options.log);
        result.summary = orchestrator.run();
    }
    transport->shutdown();
    result.summary.esn_faults = stress->estimator().faults();
    if (options.agent) result.summary.agent_faults = options.agent->faults() - agent_faults_before;
    if (agent_node) result.decisions = agent_node->decisions();
    return result;
}

}  // namespace teach::app
