#pragma once

#include "teach/app/config.hpp"
#include "teach/app/episode.hpp"
#include "teach/esn/esn.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace teach::app {

// Sensor cadence on the simulation clock.
inline constexpr double kHrRate = 1.0;  // Hz
inline constexpr double kAuRate = 5.0;  // Hz

/// Number of simulation ticks in one period of a `rate_hz` signal. Throws
/// ValidationError unless the period is a whole number of ticks.
int ticks_per_period(double rate_hz, double dt);

struct DatasetRow {
    double t = 0;
    double eda = 0;
    double label = 0;  // oracle stress
};

/// One synthetic episode under a randomized profile schedule: the profile
/// is redrawn uniformly and held for U[hold_min, hold_max] seconds.
std::vector<DatasetRow> simulate_dataset_episode(const RunConfig& config, std::uint64_t index);

struct GenDataResult {
    std::filesystem::path dir;
    std::vector<std::filesystem::path> files;
};

/// Writes episode_000.csv ... and manifest.json into config.out.
GenDataResult cmd_gen_data(const RunConfig& config);

/// A directory (every *.csv, sorted by name) or a single CSV with t, eda
/// and label columns.
std::vector<esn::Sequence> load_dataset(const std::filesystem::path& path,
                                        std::vector<std::string>* names = nullptr);

struct TrainEsnResult {
    std::string artifact;
    std::string report_path;
    std::string digest;
    esn::TrainReport train;
    esn::EvalReport validation;
    std::size_t train_episodes = 0;
    std::size_t validation_episodes = 0;
};

/// Trains on the leading episodes and validates on the trailing
/// validation_fraction of them. The reservoir seed is config.seed.
TrainEsnResult cmd_train_esn(const RunConfig& config);

/// "<dir>/<stem>.report.json" next to an artifact path.
std::string report_path_for(const std::string& artifact);

esn::EsnModel load_esn(const std::string& path);
std::string save_esn(const esn::EsnModel& model, const std::string& path);

struct TrainAgentResult {
    std::string artifact;
    std::string report_path;
    std::string digest;
    std::vector<double> episode_reward;  // mean reward per decision, per episode
    std::vector<double> episode_stress;  // mean oracle stress, per episode
    long faults = 0;
};

/// Online actor-critic training over config.train_agent.episodes in-process
/// episodes that consume the ESN's stress estimate. Episode i uses route
/// and driver seeds derived from (config.seed, first_episode + i).
TrainAgentResult cmd_train_agent(const RunConfig& config, const esn::EsnModel& esn, agent::Agent& agent);
TrainAgentResult cmd_train_agent(const RunConfig& config);

agent::Agent load_agent(const std::string& path);
std::string save_agent(const agent::Agent& agent, const std::string& path);

/// Runs one episode as configured and writes <out>/episode.jsonl plus
/// <out>/summary.json.
RunSummary cmd_run(const RunConfig& config);

struct ReplaySummary {
    std::size_t samples = 0;
    std::size_t estimates = 0;
    std::optional<double> corr;  // against labels, when present
    std::string log_path;
};

/// Plays a recorded CSV through the stress estimator over the configured
/// bus and logs (t, eda, label, stress) as JSONL to <out>/replay.jsonl.
ReplaySummary cmd_replay(const RunConfig& config);

}  // namespace teach::app
