// teach: command-line entry point for the teaching demonstrator.

#include "teach/app/bridge.hpp"
#include "teach/app/pipelines.hpp"
#include "teach/bus/broker.hpp"
#include "teach/common/error.hpp"
#include "teach/common/logging.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <iostream>
#include <thread>

namespace {

using namespace teach;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitFault = 3;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted.store(true); }

void wait_for_signal() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_interrupted.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string broker;
    std::string bridge;
    std::string fixed_profile;
    bool realtime = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Master seed");
    cmd->add_option("--out", f.out, "Output path");
    cmd->add_option("--broker", f.broker, "embedded | local | tcp://host:port");
    cmd->add_option("--bridge", f.bridge, "WebSocket bridge listen address host:port");
    cmd->add_option("--fixed-profile", f.fixed_profile, "Drive one profile instead of the agent")
        ->check(CLI::IsMember({"conservative", "normal", "aggressive"}));
    cmd->add_flag("--realtime", f.realtime, "Pace the simulation clock to wall time");
}

app::RunConfig build_config(app::Mode mode, const CommonFlags& f) {
    app::RunConfig c;
    if (!f.config.empty()) c = app::load_config(f.config);
    c.mode = mode;
    if (f.seed) c.seed = *f.seed;
    if (!f.out.empty()) c.out = f.out;
    if (!f.broker.empty()) c.broker = app::parse_broker(f.broker);
    if (!f.bridge.empty()) c.bridge = f.bridge;
    if (!f.fixed_profile.empty()) {
        c.fixed_profile = sim::parse_profile(f.fixed_profile);
        c.agent_path.clear();
    }
    if (f.realtime) c.realtime = true;
    return c;
}

void print(const json& doc) { std::cout << round_numbers(doc).dump(2) << std::endl; }

}  // namespace

int main(int argc, char** argv) {
    init_logging();
    CLI::App cli{"Human-in-the-loop driving demonstrator: bus, simulator, stress ESN and style agent"};
    cli.require_subcommand(1);

    CommonFlags flags;

    auto* gen = cli.add_subcommand("gen-data", "Simulate labelled episodes for ESN training");
    add_common(gen, flags);
    int episodes = 0;
    gen->add_option("--episodes", episodes, "Number of episodes");

    auto* train_esn = cli.add_subcommand("train-esn", "Fit the stress ESN on a dataset");
    add_common(train_esn, flags);
    std::string data;
    train_esn->add_option("--data", data, "Dataset directory or CSV");

    auto* train_agent = cli.add_subcommand("train-agent", "Train the driving-style agent in-process");
    add_common(train_agent, flags);
    std::string esn_path;
    std::optional<double> beta;
    train_agent->add_option("--esn", esn_path, "ESN artifact");
    train_agent->add_option("--episodes", episodes, "Training episodes");
    train_agent->add_option("--beta", beta, "Progress weight in the reward");

    auto* run = cli.add_subcommand("run", "Run one closed-loop episode");
    add_common(run, flags);
    std::string agent_path;
    run->add_option("--esn", esn_path, "ESN artifact");
    run->add_option("--agent", agent_path, "Agent artifact");

    auto* replay = cli.add_subcommand("replay", "Play a recorded CSV through the stress ESN");
    add_common(replay, flags);
    std::string csv;
    std::optional<int> stress_class;
    std::optional<double> rate;
    std::string col_t, col_eda, col_hr, col_label;
    replay->add_option("--esn", esn_path, "ESN artifact");
    replay->add_option("--csv", csv, "Recording to replay");
    replay->add_option("--rate", rate, "Sample rate when the CSV has no t column");
    replay->add_option("--stress-class", stress_class, "Integer label that means stressed");
    replay->add_option("--col-t", col_t, "Time column name");
    replay->add_option("--col-eda", col_eda, "EDA column name");
    replay->add_option("--col-hr", col_hr, "Heart-rate column name");
    replay->add_option("--col-label", col_label, "Label column name");

    auto* broker = cli.add_subcommand("broker", "Serve the MQTT broker until interrupted");
    std::uint16_t port = 1883;
    std::string host = "0.0.0.0";
    std::size_t max_payload = 256 * 1024;
    broker->add_option("--port", port, "TCP port");
    broker->add_option("--host", host, "Listen address");
    broker->add_option("--max-payload", max_payload, "Largest accepted PUBLISH payload in bytes");

    auto* bridge = cli.add_subcommand("bridge", "Bridge a broker to WebSocket clients until interrupted");
    add_common(bridge, flags);

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return cli.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*gen) {
            auto c = build_config(app::Mode::GenData, flags);
            if (episodes > 0) c.gen_data.episodes = episodes;
            const auto r = app::cmd_gen_data(c);
            print({{"dir", r.dir.string()}, {"episodes", r.files.size()}});
        } else if (*train_esn) {
            auto c = build_config(app::Mode::TrainEsn, flags);
            if (!data.empty()) c.train_esn.data = data;
            app::validate(c);
            const auto r = app::cmd_train_esn(c);
            print({{"artifact", r.artifact},
                   {"digest", r.digest},
                   {"report", r.report_path},
                   {"train_rmse", r.train.train_rmse},
                   {"validation_corr", r.validation.corr},
                   {"validation_episodes", r.validation_episodes}});
        } else if (*train_agent) {
            auto c = build_config(app::Mode::TrainAgent, flags);
            if (!esn_path.empty()) c.esn_path = esn_path;
            if (episodes > 0) c.train_agent.episodes = episodes;
            if (beta) {
                c.agent.beta = *beta;
                agent::validate(c.agent);
            }
            app::validate(c);
            const auto r = app::cmd_train_agent(c);
            print({{"artifact", r.artifact},
                   {"digest", r.digest},
                   {"report", r.report_path},
                   {"final_mean_reward", r.episode_reward.empty() ? 0.0 : r.episode_reward.back()}});
        } else if (*run) {
            auto c = build_config(app::Mode::Run, flags);
            if (!esn_path.empty()) c.esn_path = esn_path;
            if (!agent_path.empty()) c.agent_path = agent_path;
            app::validate(c);
            const auto summary = app::cmd_run(c);
            print(app::to_json(summary));
            if (!summary.ok) return kExitFault;
        } else if (*replay) {
            auto c = build_config(app::Mode::Replay, flags);
            if (!esn_path.empty()) c.esn_path = esn_path;
            if (!csv.empty()) c.replay.path = csv;
            if (rate) c.replay.rate_hz = *rate;
            if (stress_class) c.replay.stress_class = *stress_class;
            if (!col_t.empty()) c.replay.columns.t = col_t;
            if (!col_eda.empty()) c.replay.columns.eda = col_eda;
            if (!col_hr.empty()) c.replay.columns.hr = col_hr;
            if (!col_label.empty()) c.replay.columns.label = col_label;
            app::validate(c);
            const auto r = app::cmd_replay(c);
            print({{"samples", r.samples},
                   {"estimates", r.estimates},
                   {"corr", r.corr ? json(*r.corr) : json(nullptr)},
                   {"log", r.log_path}});
        } else if (*broker) {
            bus::BrokerLimits limits;
            limits.max_payload = max_payload;
            auto b = bus::broker_serve(host, port, limits);
            spdlog::info("broker listening on {}:{}", host, b->port());
            std::cout << "broker listening on " << host << ":" << b->port() << std::endl;
            wait_for_signal();
            b->stop();
        } else if (*bridge) {
            auto c = build_config(app::Mode::Run, flags);
            if (c.broker.kind != app::BrokerKind::External) {
                throw ValidationError("bridge needs --broker tcp://host:port");
            }
            const auto listen = bus::parse_address(flags.bridge.empty() ? "127.0.0.1:8765" : flags.bridge, 8765);
            app::Bridge b({c.broker.host, c.broker.port}, listen.host, listen.port);
            std::cout << "bridge listening on ws://" << listen.host << ":" << b.port() << std::endl;
            wait_for_signal();
            b.stop();
        }
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "runtime fault: " << e.what() << std::endl;
        return kExitFault;
    }
    return kExitOk;
}
