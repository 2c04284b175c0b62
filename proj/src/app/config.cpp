#include "teach/app/config.hpp"

#include "teach/agent/serialize.hpp"
#include "teach/bus/socket.hpp"
#include "teach/common/error.hpp"
#include "teach/esn/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <random>

namespace teach::app {
namespace {

namespace fs = std::filesystem;

json route_json(const RunConfig& c) {
    json j = {{"n_segments", c.route.n_segments},     {"length_min", c.route.length_min},
              {"length_max", c.route.length_max},     {"kappa_min", c.route.kappa_min},
              {"kappa_max", c.route.kappa_max},       {"obstacle_rate", c.route.obstacle_rate}};
    if (c.route_seed) j["seed"] = *c.route_seed;
    return j;
}

void read_route(const json& doc, RunConfig& c) {
    check_keys(doc, {"seed", "n_segments", "length_min", "length_max", "kappa_min", "kappa_max", "obstacle_rate"},
               "route");
    if (doc.contains("seed")) {
        std::uint64_t seed = 0;
        read_optional(doc, "seed", seed);
        c.route_seed = seed;
    }
    read_optional(doc, "n_segments", c.route.n_segments);
    read_optional(doc, "length_min", c.route.length_min);
    read_optional(doc, "length_max", c.route.length_max);
    read_optional(doc, "kappa_min", c.route.kappa_min);
    read_optional(doc, "kappa_max", c.route.kappa_max);
    read_optional(doc, "obstacle_rate", c.route.obstacle_rate);
    sim::validate(c.route);
}

json profiles_json(const RunConfig& c) {
    json j = json::object();
    for (auto name : sim::kAllProfiles) {
        const auto& p = c.profiles[sim::index_of(name)];
        j[sim::to_string(name)] = {
            {"v_max", p.v_max}, {"a_max", p.a_max}, {"a_brake_max", p.a_brake_max}, {"a_lat_max", p.a_lat_max}};
    }
    return j;
}

void read_profiles(const json& doc, RunConfig& c) {
    check_keys(doc, {"conservative", "normal", "aggressive"}, "profiles");
    for (const auto& [key, value] : doc.items()) {
        auto& p = c.profiles[sim::index_of(sim::parse_profile(key))];
        check_keys(value, {"v_max", "a_max", "a_brake_max", "a_lat_max"}, "profiles." + key);
        read_optional(value, "v_max", p.v_max);
        read_optional(value, "a_max", p.a_max);
        read_optional(value, "a_brake_max", p.a_brake_max);
        read_optional(value, "a_lat_max", p.a_lat_max);
    }
    sim::ProfileTable check(c.profiles);
}

void read_vehicle(const json& doc, RunConfig& c) {
    check_keys(doc, {"dt", "lookahead", "k_v"}, "vehicle");
    read_optional(doc, "dt", c.vehicle.dt);
    read_optional(doc, "lookahead", c.vehicle.lookahead);
    read_optional(doc, "k_v", c.vehicle.k_v);
    if (!(c.vehicle.dt > 0 && c.vehicle.dt <= 1) || !(c.vehicle.lookahead > 0) || !(c.vehicle.k_v > 0)) {
        throw ValidationError("vehicle: dt must lie in (0, 1], lookahead and k_v must be positive");
    }
}

json driver_json(const RunConfig& c) {
    const auto& d = c.driver;
    return {{"weights", {{"accel", d.w.accel}, {"lateral", d.w.lateral}, {"jerk", d.w.jerk}, {"speed", d.w.speed}}},
            {"a_ref", d.a_ref},
            {"l_ref", d.l_ref},
            {"j_ref", d.j_ref},
            {"v_comf", d.v_comf},
            {"v_ref", d.v_ref},
            {"tau_up", d.tau_up},
            {"tau_down", d.tau_down},
            {"eda_base", d.eda_base},
            {"k_tonic", d.k_tonic},
            {"scr_rate0", d.scr_rate0},
            {"scr_rate1", d.scr_rate1},
            {"scr_amp", d.scr_amp},
            {"tau_rise", d.tau_rise},
            {"tau_decay", d.tau_decay},
            {"sigma_eda", d.sigma_eda},
            {"eda_rate", d.eda_rate},
            {"sigma_hr", d.sigma_hr},
            {"k_au", d.k_au},
            {"sigma_au", d.sigma_au},
            {"initial_stress", c.initial_stress}};
}

void read_driver(const json& doc, RunConfig& c) {
    check_keys(doc,
               {"weights", "a_ref", "l_ref", "j_ref", "v_comf", "v_ref", "tau_up", "tau_down", "eda_base", "k_tonic",
                "scr_rate0", "scr_rate1", "scr_amp", "tau_rise", "tau_decay", "sigma_eda", "eda_rate", "sigma_hr",
                "k_au", "sigma_au", "initial_stress"},
               "driver");
    auto& d = c.driver;
    if (doc.contains("weights")) {
        const auto& w = doc.at("weights");
        check_keys(w, {"accel", "lateral", "jerk", "speed"}, "driver.weights");
        read_optional(w, "accel", d.w.accel);
        read_optional(w, "lateral", d.w.lateral);
        read_optional(w, "jerk", d.w.jerk);
        read_optional(w, "speed", d.w.speed);
    }
    read_optional(doc, "a_ref", d.a_ref);
    read_optional(doc, "l_ref", d.l_ref);
    read_optional(doc, "j_ref", d.j_ref);
    read_optional(doc, "v_comf", d.v_comf);
    read_optional(doc, "v_ref", d.v_ref);
    read_optional(doc, "tau_up", d.tau_up);
    read_optional(doc, "tau_down", d.tau_down);
    read_optional(doc, "eda_base", d.eda_base);
    read_optional(doc, "k_tonic", d.k_tonic);
    read_optional(doc, "scr_rate0", d.scr_rate0);
    read_optional(doc, "scr_rate1", d.scr_rate1);
    read_optional(doc, "scr_amp", d.scr_amp);
    read_optional(doc, "tau_rise", d.tau_rise);
    read_optional(doc, "tau_decay", d.tau_decay);
    read_optional(doc, "sigma_eda", d.sigma_eda);
    read_optional(doc, "eda_rate", d.eda_rate);
    read_optional(doc, "sigma_hr", d.sigma_hr);
    read_optional(doc, "k_au", d.k_au);
    read_optional(doc, "sigma_au", d.sigma_au);
    read_optional(doc, "initial_stress", c.initial_stress);
    driver::validate(d);
    if (!(c.initial_stress >= 0 && c.initial_stress <= 1)) {
        throw ValidationError("driver.initial_stress must lie in [0, 1]");
    }
}

void read_esn(const json& doc, RunConfig& c) {
    check_keys(doc, {"path", "config", "half_life"}, "esn");
    read_optional(doc, "path", c.esn_path);
    read_optional(doc, "half_life", c.stress_half_life);
    if (doc.contains("config")) c.esn = esn::config_from_json(doc.at("config"), c.esn);
    if (!(c.stress_half_life >= 0)) throw ValidationError("esn.half_life must be non-negative");
}

void read_agent(const json& doc, RunConfig& c) {
    check_keys(doc, {"path", "config", "learn_online", "oracle_stress"}, "agent");
    read_optional(doc, "path", c.agent_path);
    read_optional(doc, "learn_online", c.learn_online);
    read_optional(doc, "oracle_stress", c.oracle_stress);
    if (doc.contains("config")) c.agent = agent::config_from_json(doc.at("config"), c.agent);
}

std::vector<ScriptedEvent> read_events(const json& doc) {
    if (!doc.is_array()) throw ValidationError("events must be an array");
    std::vector<ScriptedEvent> out;
    for (const auto& e : doc) {
        if (!e.is_object()) throw ValidationError("events entries must be objects");
        check_keys(e, {"t", "kind", "value"}, "events[]");
        ScriptedEvent ev;
        ev.t = require_number(e, "t");
        json msg = e;
        msg["ts"] = ev.t;
        msg.erase("t");
        ev.message = bus::parse_override(msg);
        if (!out.empty() && ev.t < out.back().t) throw ValidationError("events must be ordered by t");
        out.push_back(std::move(ev));
    }
    return out;
}

json events_json(const std::vector<ScriptedEvent>& events) {
    json out = json::array();
    for (const auto& e : events) {
        json j = bus::to_json(e.message);
        j.erase("ts");
        j["t"] = e.t;
        out.push_back(std::move(j));
    }
    return out;
}

void read_replay(const json& doc, RunConfig& c) {
    check_keys(doc, {"path", "rate_hz", "stress_class", "columns"}, "replay");
    std::string path = c.replay.path.string();
    read_optional(doc, "path", path);
    c.replay.path = path;
    read_optional(doc, "rate_hz", c.replay.rate_hz);
    if (doc.contains("stress_class") && !doc.at("stress_class").is_null()) {
        int cls = 0;
        read_optional(doc, "stress_class", cls);
        c.replay.stress_class = cls;
    }
    if (doc.contains("columns")) {
        const auto& cols = doc.at("columns");
        check_keys(cols, {"t", "eda", "hr", "label"}, "replay.columns");
        read_optional(cols, "t", c.replay.columns.t);
        read_optional(cols, "eda", c.replay.columns.eda);
        read_optional(cols, "hr", c.replay.columns.hr);
        read_optional(cols, "label", c.replay.columns.label);
    }
    if (!(c.replay.rate_hz > 0)) throw ValidationError("replay.rate_hz must be positive");
}

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw ValidationError(std::string(what) + " is required for this mode");
    std::error_code ec;
    if (!fs::exists(path, ec)) throw ValidationError(std::string(what) + " not found: " + path);
}

}  // namespace

const char* to_string(Mode mode) {
    switch (mode) {
        case Mode::GenData: return "gen-data";
        case Mode::TrainEsn: return "train-esn";
        case Mode::TrainAgent: return "train-agent";
        case Mode::Run: return "run";
        case Mode::Replay: return "replay";
    }
    return "?";
}

Mode parse_mode(const std::string& text) {
    for (auto m : {Mode::GenData, Mode::TrainEsn, Mode::TrainAgent, Mode::Run, Mode::Replay}) {
        if (text == to_string(m)) return m;
    }
    throw ValidationError("unknown mode \"" + text + "\"");
}

BrokerChoice parse_broker(const std::string& text) {
    if (text == "local") return {BrokerKind::Local, "", 0};
    if (text == "embedded") return {BrokerKind::Embedded, "127.0.0.1", 0};
    const std::string prefix = "tcp://";
    if (text.rfind(prefix, 0) != 0) {
        throw ValidationError("broker must be \"local\", \"embedded\" or tcp://host:port, got \"" + text + "\"");
    }
    const auto addr = bus::parse_address(text.substr(prefix.size()));
    return {BrokerKind::External, addr.host, addr.port};
}

std::string to_string(const BrokerChoice& broker) {
    switch (broker.kind) {
        case BrokerKind::Local: return "local";
        case BrokerKind::Embedded: return "embedded";
        case BrokerKind::External: return "tcp://" + broker.host + ":" + std::to_string(broker.port);
    }
    return "?";
}

RunConfig config_from_json(const json& doc, RunConfig c) {
    check_keys(doc,
               {"mode", "seed", "broker", "episode_length", "route", "profiles", "vehicle", "driver", "esn", "agent",
                "fixed_profile", "override_target", "events", "bridge", "realtime", "out", "gen_data", "train_esn",
                "train_agent", "replay"},
               "config");
    if (doc.contains("mode")) {
        std::string mode;
        read_optional(doc, "mode", mode);
        c.mode = parse_mode(mode);
    }
    read_optional(doc, "seed", c.seed);
    if (doc.contains("broker")) {
        std::string broker;
        read_optional(doc, "broker", broker);
        c.broker = parse_broker(broker);
    }
    read_optional(doc, "episode_length", c.episode_length);
    if (!(c.episode_length > 0)) throw ValidationError("episode_length must be positive");
    if (doc.contains("route")) read_route(doc.at("route"), c);
    if (doc.contains("profiles")) read_profiles(doc.at("profiles"), c);
    if (doc.contains("vehicle")) read_vehicle(doc.at("vehicle"), c);
    if (doc.contains("driver")) read_driver(doc.at("driver"), c);
    if (doc.contains("esn")) read_esn(doc.at("esn"), c);
    if (doc.contains("agent")) read_agent(doc.at("agent"), c);
    if (doc.contains("fixed_profile")) {
        const auto& fp = doc.at("fixed_profile");
        if (fp.is_null()) {
            c.fixed_profile.reset();
        } else if (fp.is_string()) {
            c.fixed_profile = sim::parse_profile(fp.get<std::string>());
        } else {
            throw_field_type("fixed_profile");
        }
    }
    if (doc.contains("override_target")) {
        std::string target;
        read_optional(doc, "override_target", target);
        if (target == "esn") {
            c.override_target = OverrideTarget::Esn;
        } else if (target == "driver") {
            c.override_target = OverrideTarget::Driver;
        } else {
            throw ValidationError("override_target must be \"esn\" or \"driver\"");
        }
    }
    if (doc.contains("events")) c.events = read_events(doc.at("events"));
    if (doc.contains("bridge")) {
        const auto& b = doc.at("bridge");
        if (b.is_null()) {
            c.bridge.reset();
        } else if (b.is_string()) {
            c.bridge = b.get<std::string>();
        } else {
            throw_field_type("bridge");
        }
    }
    read_optional(doc, "realtime", c.realtime);
    read_optional(doc, "out", c.out);
    if (doc.contains("gen_data")) {
        const auto& g = doc.at("gen_data");
        check_keys(g, {"episodes", "hold_min", "hold_max"}, "gen_data");
        read_optional(g, "episodes", c.gen_data.episodes);
        read_optional(g, "hold_min", c.gen_data.hold_min);
        read_optional(g, "hold_max", c.gen_data.hold_max);
    }
    if (c.gen_data.episodes < 1 || !(c.gen_data.hold_min > 0) || !(c.gen_data.hold_max >= c.gen_data.hold_min)) {
        throw ValidationError("gen_data: episodes >= 1 and 0 < hold_min <= hold_max required");
    }
    if (doc.contains("train_esn")) {
        const auto& t = doc.at("train_esn");
        check_keys(t, {"data", "validation_fraction"}, "train_esn");
        read_optional(t, "data", c.train_esn.data);
        read_optional(t, "validation_fraction", c.train_esn.validation_fraction);
    }
    if (!(c.train_esn.validation_fraction >= 0 && c.train_esn.validation_fraction < 1)) {
        throw ValidationError("train_esn.validation_fraction must lie in [0, 1)");
    }
    if (doc.contains("train_agent")) {
        const auto& t = doc.at("train_agent");
        check_keys(t, {"episodes", "first_episode"}, "train_agent");
        read_optional(t, "episodes", c.train_agent.episodes);
        read_optional(t, "first_episode", c.train_agent.first_episode);
    }
    if (c.train_agent.episodes < 1) throw ValidationError("train_agent.episodes must be >= 1");
    if (doc.contains("replay")) read_replay(doc.at("replay"), c);
    if (c.fixed_profile && !c.agent_path.empty()) {
        throw ValidationError("fixed_profile and agent.path are mutually exclusive");
    }
    return c;
}

json to_json(const RunConfig& c) {
    json j = {{"mode", to_string(c.mode)},
              {"seed", c.seed},
              {"broker", to_string(c.broker)},
              {"episode_length", c.episode_length},
              {"route", route_json(c)},
              {"profiles", profiles_json(c)},
              {"vehicle", {{"dt", c.vehicle.dt}, {"lookahead", c.vehicle.lookahead}, {"k_v", c.vehicle.k_v}}},
              {"driver", driver_json(c)},
              {"esn", {{"path", c.esn_path}, {"config", esn::to_json(c.esn)}, {"half_life", c.stress_half_life}}},
              {"agent",
               {{"path", c.agent_path}, {"config", agent::to_json(c.agent)}, {"learn_online", c.learn_online},
                {"oracle_stress", c.oracle_stress}}},
              {"fixed_profile", c.fixed_profile ? json(sim::to_string(*c.fixed_profile)) : json(nullptr)},
              {"override_target", c.override_target == OverrideTarget::Esn ? "esn" : "driver"},
              {"events", events_json(c.events)},
              {"bridge", c.bridge ? json(*c.bridge) : json(nullptr)},
              {"realtime", c.realtime},
              {"out", c.out},
              {"gen_data",
               {{"episodes", c.gen_data.episodes}, {"hold_min", c.gen_data.hold_min}, {"hold_max", c.gen_data.hold_max}}},
              {"train_esn",
               {{"data", c.train_esn.data}, {"validation_fraction", c.train_esn.validation_fraction}}},
              {"train_agent",
               {{"episodes", c.train_agent.episodes}, {"first_episode", c.train_agent.first_episode}}},
              {"replay",
               {{"path", c.replay.path.string()},
                {"rate_hz", c.replay.rate_hz},
                {"stress_class", c.replay.stress_class ? json(*c.replay.stress_class) : json(nullptr)},
                {"columns",
                 {{"t", c.replay.columns.t},
                  {"eda", c.replay.columns.eda},
                  {"hr", c.replay.columns.hr},
                  {"label", c.replay.columns.label}}}}}};
    if (!c.route_seed) j["route"].erase("seed");
    return j;
}

void validate(const RunConfig& c) {
    if (c.fixed_profile && !c.agent_path.empty()) {
        throw ValidationError("fixed_profile and agent.path are mutually exclusive");
    }
    switch (c.mode) {
        case Mode::GenData:
            break;
        case Mode::TrainEsn:
            require_file(c.train_esn.data, "train_esn.data");
            break;
        case Mode::TrainAgent:
            require_file(c.esn_path, "esn.path");
            break;
        case Mode::Run:
            require_file(c.esn_path, "esn.path");
            if (!c.fixed_profile) require_file(c.agent_path, "agent.path (or fixed_profile)");
            break;
        case Mode::Replay:
            require_file(c.replay.path.string(), "replay.path");
            require_file(c.esn_path, "esn.path");
            break;
    }
}

RunConfig load_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(doc, std::move(base));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t purpose, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose,
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    return rng();
}

}  // namespace teach::app
