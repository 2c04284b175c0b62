#pragma once

#include "teach/bus/client.hpp"
#include "teach/bus/envelope.hpp"
#include "teach/common/error.hpp"

#include <atomic>
#include <chrono>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace teach::app {

/// A bus-connected module. Handlers run on one thread at a time and only
/// ever see messages matching subscriptions().
class Node {
public:
    virtual ~Node() = default;
    virtual std::string name() const = 0;
    virtual std::vector<std::string> subscriptions() const = 0;
    /// Envelopes returned here are published by the transport in order.
    virtual std::vector<bus::Envelope> on_message(const bus::Envelope& envelope) = 0;
};

/// A module failed; `what()` names it.
class NodeFault : public RuntimeFault {
public:
    using RuntimeFault::RuntimeFault;
};

/// Connects the orchestrator and its nodes. The orchestrator publishes and
/// reads its own inbox (envelopes matching `inbox_filters`).
class Transport {
public:
    virtual ~Transport() = default;
    virtual void publish(const bus::Envelope& envelope) = 0;
    /// Next inbox envelope, nullopt on timeout. Throws NodeFault once a node
    /// has failed.
    virtual std::optional<bus::Envelope> receive(std::chrono::milliseconds timeout) = 0;
    /// True when a reply to a publish is delivered before publish returns.
    virtual bool synchronous() const = 0;
    /// Stops node tasks and disconnects. Idempotent.
    virtual void shutdown() = 0;
};

/// In-process dispatch without sockets. publish() delivers depth-first:
/// each matching node runs immediately and whatever it returns is
/// dispatched before the next subscriber sees the original envelope.
class LocalTransport : public Transport {
public:
    LocalTransport(std::vector<std::shared_ptr<Node>> nodes, std::vector<std::string> inbox_filters);

    void publish(const bus::Envelope& envelope) override;
    std::optional<bus::Envelope> receive(std::chrono::milliseconds timeout) override;
    bool synchronous() const override { return true; }
    void shutdown() override {}

private:
    void dispatch(const bus::Envelope& envelope, int depth);

    std::vector<std::shared_ptr<Node>> nodes_;
    std::vector<std::string> inbox_filters_;
    std::deque<bus::Envelope> inbox_;
};

/// One MQTT client and one task per node against a broker, plus a client
/// for the orchestrator. Node exceptions stop that node and surface as a
/// NodeFault from receive().
class MqttTransport : public Transport {
public:
    MqttTransport(const bus::Address& broker, std::vector<std::shared_ptr<Node>> nodes,
                  std::vector<std::string> inbox_filters, const std::string& id_prefix = "teach");
    ~MqttTransport() override;

    void publish(const bus::Envelope& envelope) override;
    std::optional<bus::Envelope> receive(std::chrono::milliseconds timeout) override;
    bool synchronous() const override { return false; }
    void shutdown() override;

private:
    struct Worker {
        std::shared_ptr<Node> node;
        std::unique_ptr<bus::Client> client;
        std::thread thread;
    };
    void run_worker(Worker& worker);
    void check_fault() const;

    std::unique_ptr<bus::Client> self_;
    std::vector<std::unique_ptr<Worker>> workers_;
    std::atomic<bool> stopping_{false};
    mutable std::mutex fault_mutex_;
    std::optional<std::string> fault_;
    bool shut_down_ = false;
};

}  // namespace teach::app
