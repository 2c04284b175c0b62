#include "teach/app/artifact.hpp"
#include "teach/app/pipelines.hpp"
#include "teach/driver/replay.hpp"
#include "teach/esn/serialize.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace teach::app {
namespace {

namespace fs = std::filesystem;

std::string fmt9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string episode_name(std::uint64_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "episode_%03llu.csv", static_cast<unsigned long long>(i));
    return buf;
}

}  // namespace

int ticks_per_period(double rate_hz, double dt) {
    const double ticks = 1.0 / (rate_hz * dt);
    const long n = std::lround(ticks);
    if (n < 1 || std::abs(ticks - static_cast<double>(n)) > 1e-6) {
        throw ValidationError("a " + fmt9(rate_hz) + " Hz signal is not a whole number of " + fmt9(dt) + " s ticks");
    }
    return static_cast<int>(n);
}

std::vector<DatasetRow> simulate_dataset_episode(const RunConfig& config, std::uint64_t index) {
    const auto setup = episode_setup(config, index);
    std::mt19937_64 schedule(derive_seed(config.seed, purpose::kSchedule, index));
    std::uniform_int_distribution<int> pick(0, 2);
    std::uniform_real_distribution<double> hold(config.gen_data.hold_min, config.gen_data.hold_max);

    const auto first = sim::kAllProfiles[static_cast<std::size_t>(pick(schedule))];
    sim::VehicleSim sim(setup.route, sim::ProfileTable(config.profiles), config.vehicle, first);
    driver::Driver driver(config.driver, setup.driver_seed, config.initial_stress);
    const int eda_ticks = ticks_per_period(config.driver.eda_rate, config.vehicle.dt);
    const long total = std::lround(config.episode_length / config.vehicle.dt);

    double next_switch = hold(schedule);
    std::vector<DatasetRow> rows;
    rows.reserve(static_cast<std::size_t>(total / eda_ticks + 1));
    for (long k = 0; k <= total; ++k) {
        const double t = round9(static_cast<double>(k) * config.vehicle.dt);
        if (t >= next_switch) {
            sim.set_profile(sim::kAllProfiles[static_cast<std::size_t>(pick(schedule))]);
            next_switch += hold(schedule);
        }
        if (k % eda_ticks == 0) {
            const double eda = driver.emit_eda(t).values.at("eda_uS");
            rows.push_back({t, eda, driver.state().s});
        }
        if (k == total || !sim.step()) break;
        driver.step(sim.state(), config.vehicle.dt);
    }
    return rows;
}

GenDataResult cmd_gen_data(const RunConfig& config) {
    GenDataResult result;
    result.dir = config.out.empty() ? fs::path("data") : fs::path(config.out);
    std::error_code ec;
    fs::create_directories(result.dir, ec);
    if (ec || !fs::is_directory(result.dir)) {
        throw RuntimeFault("cannot create dataset directory " + result.dir.string());
    }
    json episodes = json::array();
    for (int i = 0; i < config.gen_data.episodes; ++i) {
        const auto index = static_cast<std::uint64_t>(i);
        const auto rows = simulate_dataset_episode(config, index);
        const auto path = result.dir / episode_name(index);
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw RuntimeFault("cannot write " + path.string());
        f << "t,eda,label\n";
        for (const auto& r : rows) f << fmt9(r.t) << ',' << fmt9(r.eda) << ',' << fmt9(r.label) << '\n';
        if (!f) throw RuntimeFault("write failed for " + path.string());
        result.files.push_back(path);
        episodes.push_back({{"file", path.filename().string()},
                            {"rows", rows.size()},
                            {"route_seed", config.route_seed ? *config.route_seed + index
                                                             : derive_seed(config.seed, purpose::kRoute, index)},
                            {"driver_seed", derive_seed(config.seed, purpose::kDriver, index)},
                            {"schedule_seed", derive_seed(config.seed, purpose::kSchedule, index)}});
        spdlog::info("gen-data: wrote {} ({} rows)", path.string(), rows.size());
    }
    const json full = to_json(config);
    json manifest = {{"kind", "dataset"},
                     {"seed", config.seed},
                     {"episodes", episodes},
                     {"columns", {"t", "eda", "label"}},
                     {"parameters",
                      {{"episode_length", full["episode_length"]},
                       {"route", full["route"]},
                       {"profiles", full["profiles"]},
                       {"vehicle", full["vehicle"]},
                       {"driver", full["driver"]},
                       {"gen_data", full["gen_data"]}}}};
    std::ofstream m(result.dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!m) throw RuntimeFault("cannot write manifest in " + result.dir.string());
    m << manifest.dump(2) << '\n';
    return result;
}

std::vector<esn::Sequence> load_dataset(const fs::path& path, std::vector<std::string>* names) {
    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(path);
    }
    if (files.empty()) throw ValidationError("no CSV files in " + path.string());
    std::vector<esn::Sequence> out;
    for (const auto& file : files) {
        driver::ReplaySource source;
        source.path = file;
        const auto data = driver::load_replay(source);
        if (!data.has_labels) throw ValidationError(file.string() + ": training data needs a label column");
        esn::Sequence seq;
        for (const auto& row : data.rows) {
            if (!row.label) throw ValidationError(file.string() + ": row without label");
            seq.eda.push_back(row.eda);
            seq.label.push_back(*row.label);
        }
        out.push_back(std::move(seq));
        if (names) names->push_back(file.filename().string());
    }
    return out;
}

std::string report_path_for(const std::string& artifact) {
    const fs::path p(artifact);
    return (p.parent_path() / (p.stem().string() + ".report.json")).string();
}

esn::EsnModel load_esn(const std::string& path) {
    return esn::model_from_json(load_artifact(path, "esn", esn::kModelVersion));
}

std::string save_esn(const esn::EsnModel& model, const std::string& path) {
    return save_artifact(esn::model_to_json(model), path);
}

TrainEsnResult cmd_train_esn(const RunConfig& config) {
    std::vector<std::string> names;
    auto sequences = load_dataset(config.train_esn.data, &names);
    const std::size_t n = sequences.size();
    std::size_t n_val = static_cast<std::size_t>(std::lround(config.train_esn.validation_fraction * static_cast<double>(n)));
    if (config.train_esn.validation_fraction > 0 && n_val == 0 && n > 1) n_val = 1;
    if (n_val >= n) throw ValidationError("validation split leaves no training episodes");

    std::vector<esn::Sequence> train(sequences.begin(), sequences.end() - static_cast<long>(n_val));
    std::vector<esn::Sequence> val(sequences.end() - static_cast<long>(n_val), sequences.end());

    esn::EsnConfig ec = config.esn;
    ec.seed = config.seed;
    TrainEsnResult result;
    const auto model = esn::train_esn(train, ec, &result.train);
    if (!std::isfinite(result.train.train_rmse)) throw RuntimeFault("ESN training produced a non-finite loss");
    if (!val.empty()) result.validation = esn::evaluate(model, val);
    result.train_episodes = train.size();
    result.validation_episodes = val.size();

    result.artifact = config.out.empty() ? "esn.json" : config.out;
    result.digest = save_esn(model, result.artifact);
    result.report_path = report_path_for(result.artifact);
    json report = {{"kind", "esn-report"},
                   {"artifact", fs::path(result.artifact).filename().string()},
                   {"digest", result.digest},
                   {"train",
                    {{"episodes", json(std::vector<std::string>(names.begin(), names.begin() + static_cast<long>(train.size())))},
                     {"columns", result.train.columns},
                     {"rmse", result.train.train_rmse},
                     {"corr", result.train.train_corr}}},
                   {"validation",
                    {{"episodes", json(std::vector<std::string>(names.end() - static_cast<long>(n_val), names.end()))},
                     {"samples", result.validation.samples},
                     {"corr", val.empty() ? json(nullptr) : json(result.validation.corr)},
                     {"rmse", val.empty() ? json(nullptr) : json(result.validation.rmse)}}}};
    std::ofstream f(result.report_path, std::ios::binary | std::ios::trunc);
    if (!f) throw RuntimeFault("cannot write " + result.report_path);
    f << report.dump(2) << '\n';
    return result;
}

}  // namespace teach::app
