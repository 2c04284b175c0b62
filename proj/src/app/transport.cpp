#include "teach/app/transport.hpp"

#include "teach/bus/topic.hpp"

#include <spdlog/spdlog.h>

#include <unistd.h>

namespace teach::app {
namespace {

bool matches_any(const std::vector<std::string>& filters, const std::string& topic) {
    for (const auto& f : filters) {
        if (bus::topic_matches(f, topic)) return true;
    }
    return false;
}

// Replies beyond this depth indicate a publish loop between nodes.
constexpr int kMaxDispatchDepth = 32;

}  // namespace

LocalTransport::LocalTransport(std::vector<std::shared_ptr<Node>> nodes, std::vector<std::string> inbox_filters)
    : nodes_(std::move(nodes)), inbox_filters_(std::move(inbox_filters)) {
    for (const auto& f : inbox_filters_) bus::validate_filter(f);
    for (const auto& n : nodes_) {
        for (const auto& f : n->subscriptions()) bus::validate_filter(f);
    }
}

void LocalTransport::publish(const bus::Envelope& envelope) { dispatch(envelope, 0); }

void LocalTransport::dispatch(const bus::Envelope& envelope, int depth) {
    if (depth > kMaxDispatchDepth) {
        throw NodeFault("local bus: publish loop detected on " + envelope.topic());
    }
    if (matches_any(inbox_filters_, envelope.topic())) inbox_.push_back(envelope);
    for (const auto& node : nodes_) {
        if (!matches_any(node->subscriptions(), envelope.topic())) continue;
        std::vector<bus::Envelope> out;
        try {
            out = node->on_message(envelope);
        } catch (const std::exception& e) {
            throw NodeFault("module " + node->name() + " failed: " + e.what());
        }
        for (const auto& reply : out) dispatch(reply, depth + 1);
    }
}

std::optional<bus::Envelope> LocalTransport::receive(std::chrono::milliseconds) {
    if (inbox_.empty()) return std::nullopt;
    auto e = std::move(inbox_.front());
    inbox_.pop_front();
    return e;
}

MqttTransport::MqttTransport(const bus::Address& broker, std::vector<std::shared_ptr<Node>> nodes,
                             std::vector<std::string> inbox_filters, const std::string& id_prefix) {
    const std::string base = id_prefix + "-" + std::to_string(::getpid()) + "-";
    bus::ClientOptions options;
    options.client_id = base + "orchestrator";
    self_ = std::make_unique<bus::Client>(broker, options);
    for (const auto& f : inbox_filters) self_->subscribe(f);
    try {
        for (auto& node : nodes) {
            auto w = std::make_unique<Worker>();
            w->node = node;
            bus::ClientOptions o;
            o.client_id = base + node->name();
            w->client = std::make_unique<bus::Client>(broker, o);
            for (const auto& f : node->subscriptions()) w->client->subscribe(f);
            workers_.push_back(std::move(w));
        }
    } catch (...) {
        shutdown();
        throw;
    }
    // Start tasks only once every subscription is in place.
    for (auto& w : workers_) {
        Worker* raw = w.get();
        w->thread = std::thread([this, raw] { run_worker(*raw); });
    }
}

MqttTransport::~MqttTransport() { shutdown(); }

void MqttTransport::run_worker(Worker& w) {
    try {
        while (!stopping_.load()) {
            auto env = w.client->receive(std::chrono::milliseconds(50));
            if (!env) {
                if (!w.client->connected()) throw bus::ConnectionLost("lost broker connection");
                continue;
            }
            for (const auto& reply : w.node->on_message(*env)) w.client->publish(reply);
        }
    } catch (const std::exception& e) {
        if (stopping_.load()) return;
        std::lock_guard lock(fault_mutex_);
        if (!fault_) fault_ = "module " + w.node->name() + " failed: " + e.what();
        spdlog::error("{}", *fault_);
    }
}

void MqttTransport::check_fault() const {
    std::lock_guard lock(fault_mutex_);
    if (fault_) throw NodeFault(*fault_);
}

void MqttTransport::publish(const bus::Envelope& envelope) {
    check_fault();
    self_->publish(envelope);
}

std::optional<bus::Envelope> MqttTransport::receive(std::chrono::milliseconds timeout) {
    check_fault();
    auto env = self_->receive(timeout);
    if (!env) {
        check_fault();
        if (!self_->connected()) throw NodeFault("orchestrator lost its broker connection");
    }
    return env;
}

void MqttTransport::shutdown() {
    if (shut_down_) return;
    shut_down_ = true;
    stopping_.store(true);
    for (auto& w : workers_) {
        if (w->thread.joinable()) w->thread.join();
    }
    for (auto& w : workers_) {
        if (w->client) w->client->disconnect();
    }
    if (self_) self_->disconnect();
}

}  // namespace teach::app
