#include "teach/app/pipelines.hpp"

#include "teach/agent/serialize.hpp"
#include "teach/app/artifact.hpp"
#include "teach/app/bridge.hpp"
#include "teach/bus/broker.hpp"
#include "teach/driver/replay.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

namespace teach::app {
namespace {

namespace fs = std::filesystem;
using namespace std::chrono_literals;

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Owns the broker (embedded mode) and the bridge for the lifetime of a
/// command.
struct BusRuntime {
    std::unique_ptr<bus::Broker> broker;
    std::optional<bus::Address> address;
    std::unique_ptr<Bridge> bridge;

    explicit BusRuntime(const RunConfig& config) {
        switch (config.broker.kind) {
            case BrokerKind::Local:
                if (config.bridge) throw ValidationError("the bridge needs an embedded or external broker");
                return;
            case BrokerKind::Embedded:
                broker = bus::broker_serve("127.0.0.1", 0);
                address = bus::Address{"127.0.0.1", broker->port()};
                break;
            case BrokerKind::External:
                address = bus::Address{config.broker.host, config.broker.port};
                break;
        }
        if (config.bridge) {
            const auto ws = bus::parse_address(*config.bridge, 8765);
            bridge = std::make_unique<Bridge>(*address, ws.host, ws.port);
            spdlog::info("bridge listening on ws://{}:{}", ws.host, bridge->port());
        }
    }

    // Ordered shutdown: bridge, then broker.
    ~BusRuntime() {
        if (bridge) bridge->stop();
        if (broker) broker->stop();
    }
};

fs::path output_dir(const RunConfig& config, const char* fallback) {
    fs::path dir = config.out.empty() ? fs::path(fallback) : fs::path(config.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw RuntimeFault("cannot create output directory " + dir.string());
    return dir;
}

}  // namespace

agent::Agent load_agent(const std::string& path) {
    auto [config, params] = agent::model_from_json(load_artifact(path, "agent", agent::kModelVersion));
    return agent::Agent(config, std::move(params));
}

std::string save_agent(const agent::Agent& agent, const std::string& path) {
    return save_artifact(agent::model_to_json(agent.config(), agent.params()), path);
}

TrainAgentResult cmd_train_agent(const RunConfig& config, const esn::EsnModel& esn, agent::Agent& agent) {
    RunConfig c = config;
    c.broker = {BrokerKind::Local, "", 0};
    c.fixed_profile.reset();
    c.events.clear();
    c.realtime = false;
    c.agent = agent.config();

    TrainAgentResult result;
    EpisodeOptions options;
    options.agent = &agent;
    options.greedy = false;
    options.learn = true;
    for (int i = 0; i < config.train_agent.episodes; ++i) {
        const auto setup = episode_setup(c, config.train_agent.first_episode + static_cast<std::uint64_t>(i));
        const auto episode = run_episode(c, setup, esn, options);
        if (!episode.summary.ok) throw RuntimeFault("training episode " + std::to_string(i) + ": " + episode.summary.cause);
        std::vector<double> rewards;
        for (const auto& d : episode.decisions) {
            if (d.reward) rewards.push_back(*d.reward);
        }
        const auto& th = episode.summary.stress_thirds;
        double stress = 0;
        int n = 0;
        for (double x : th) {
            if (std::isfinite(x)) {
                stress += x;
                ++n;
            }
        }
        result.episode_reward.push_back(mean(rewards));
        result.episode_stress.push_back(n ? stress / n : 0.0);
        result.faults += episode.summary.agent_faults;
        spdlog::debug("train-agent: episode {} mean reward {:.4f}", i, result.episode_reward.back());
    }
    return result;
}

TrainAgentResult cmd_train_agent(const RunConfig& config) {
    const auto esn = load_esn(config.esn_path);
    agent::AgentConfig ac = config.agent;
    ac.seed = config.seed;
    agent::Agent agent(ac);
    auto result = cmd_train_agent(config, esn, agent);
    for (double r : result.episode_reward) {
        if (!std::isfinite(r)) throw RuntimeFault("agent training produced a non-finite reward");
    }
    result.artifact = config.out.empty() ? "agent.json" : config.out;
    result.digest = save_agent(agent, result.artifact);
    result.report_path = report_path_for(result.artifact);
    json report = {{"kind", "agent-report"},
                   {"artifact", fs::path(result.artifact).filename().string()},
                   {"digest", result.digest},
                   {"episodes", config.train_agent.episodes},
                   {"beta", ac.beta},
                   {"mean_reward", result.episode_reward},
                   {"mean_stress", result.episode_stress},
                   {"skipped_updates", result.faults}};
    std::ofstream f(result.report_path, std::ios::binary | std::ios::trunc);
    if (!f) throw RuntimeFault("cannot write " + result.report_path);
    f << round_numbers(report).dump(2) << '\n';
    return result;
}

RunSummary cmd_run(const RunConfig& config) {
    const auto esn = load_esn(config.esn_path);
    std::optional<agent::Agent> agent;
    if (!config.fixed_profile) agent.emplace(load_agent(config.agent_path));

    RunConfig c = config;
    if (agent) c.agent = agent->config();
    const auto dir = output_dir(config, "run");
    BusRuntime runtime(c);

    std::ofstream log(dir / "episode.jsonl", std::ios::binary | std::ios::trunc);
    if (!log) throw RuntimeFault("cannot write " + (dir / "episode.jsonl").string());
    EpisodeOptions options;
    options.agent = agent ? &*agent : nullptr;
    options.greedy = true;
    options.learn = config.learn_online;
    options.log = &log;
    options.broker = runtime.address;
    const auto result = run_episode(c, episode_setup(c), esn, options);
    log.close();

    std::ofstream f(dir / "summary.json", std::ios::binary | std::ios::trunc);
    f << round_numbers(to_json(result.summary)).dump(2) << '\n';
    if (agent && config.learn_online) save_agent(*agent, (dir / "agent.json").string());
    return result.summary;
}

ReplaySummary cmd_replay(const RunConfig& config) {
    const auto esn = load_esn(config.esn_path);
    const auto data = driver::load_replay(config.replay);
    const auto dir = output_dir(config, "replay");
    BusRuntime runtime(config);

    auto node = std::make_shared<StressNode>(esn, config.stress_half_life);
    const std::vector<std::string> inbox{bus::topics::kStress};
    std::unique_ptr<Transport> transport;
    if (runtime.address) {
        transport = std::make_unique<MqttTransport>(*runtime.address, std::vector<std::shared_ptr<Node>>{node}, inbox);
    } else {
        transport = std::make_unique<LocalTransport>(std::vector<std::shared_ptr<Node>>{node}, inbox);
    }

    ReplaySummary summary;
    summary.log_path = (dir / "replay.jsonl").string();
    std::ofstream log(summary.log_path, std::ios::binary | std::ios::trunc);
    std::vector<double> est, lab;
    const auto start = std::chrono::steady_clock::now();
    const double t0 = data.rows.empty() ? 0.0 : data.rows.front().t;
    std::uint64_t seq = 0;
    for (const auto& row : data.rows) {
        if (config.realtime) {
            std::this_thread::sleep_until(start + std::chrono::duration<double>(row.t - t0));
        }
        const auto env = bus::make_envelope(bus::EdaMsg{row.t, seq++, row.eda});
        const double ts = bus::parse_eda(env.payload_json()).ts;
        transport->publish(env);
        std::optional<double> stress;
        if (seq >= samples_until_estimate(esn.config)) {
            const auto deadline = std::chrono::steady_clock::now() + 10s;
            while (!stress) {
                auto reply = transport->receive(transport->synchronous() ? 0ms : 50ms);
                if (reply) {
                    const auto msg = bus::parse_stress(reply->payload_json());
                    if (msg.ts == ts) stress = msg.stress;
                } else if (transport->synchronous() || std::chrono::steady_clock::now() > deadline) {
                    throw RuntimeFault("no stress estimate for replayed sample at t=" + std::to_string(row.t));
                }
            }
            ++summary.estimates;
            if (row.label) {
                est.push_back(*stress);
                lab.push_back(*row.label);
            }
        }
        json rec = {{"t", row.t},
                    {"eda", row.eda},
                    {"label", row.label ? json(*row.label) : json(nullptr)},
                    {"stress_est", stress ? json(*stress) : json(nullptr)}};
        log << canonical_dump(rec) << '\n';
        ++summary.samples;
    }
    transport->shutdown();
    if (est.size() >= 2) {
        try {
            summary.corr = esn::pearson(est, lab);
        } catch (const ValidationError&) {
            summary.corr.reset();  // constant labels or estimates
        }
    }
    return summary;
}

}  // namespace teach::app
