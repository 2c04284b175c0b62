#pragma once

#include "teach/bus/packet.hpp"
#include "teach/bus/socket.hpp"

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

namespace teach::bus {

struct BrokerLimits {
    std::size_t max_payload = 256 * 1024;
    std::size_t max_sessions = 256;
    /// Outbound packets queued per session before it is dropped as a slow
    /// consumer.
    std::size_t max_queue = 200'000;
    std::chrono::milliseconds ack_timeout{2000};
    int max_retries = 5;
    std::chrono::milliseconds connect_timeout{10'000};
};

/// Test hooks. Both run on broker threads and must be thread-safe.
struct BrokerHooks {
    /// Return true to silently drop a packet the broker is about to send.
    std::function<bool(const std::string& client_id, const Packet&)> drop_outbound;
    /// Observes every packet the broker decodes.
    std::function<void(const std::string& client_id, const Packet&)> on_inbound;
};

class Session;

/// MQTT 3.1.1 broker: clean sessions, QoS 0 and 1, no retain or will.
/// One reader and one writer thread per connection. Fan-out to all
/// matching sessions happens atomically with respect to other fan-outs, so
/// every subscriber observes publications in the same relative order.
class Broker {
public:
    Broker(const std::string& host, std::uint16_t port, BrokerLimits limits = {}, BrokerHooks hooks = {});
    ~Broker();
    Broker(const Broker&) = delete;
    Broker& operator=(const Broker&) = delete;

    std::uint16_t port() const noexcept { return listener_.port(); }
    std::size_t session_count() const;

    /// Idempotent; closes every session and joins all threads.
    void stop();

private:
    friend class Session;

    void accept_loop();
    void reap_finished();
    bool register_session(const std::shared_ptr<Session>& session, std::string client_id);
    void unregister_session(const Session* session);
    void subscribe(const std::shared_ptr<Session>& session, const std::string& filter, std::uint8_t qos);
    void unsubscribe(const Session* session, const std::string& filter);
    void route(const Publish& publish);

    BrokerLimits limits_;
    BrokerHooks hooks_;
    Listener listener_;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;

    mutable std::mutex sessions_mutex_;
    std::vector<std::shared_ptr<Session>> sessions_;  // all live or finishing sessions

    // Subscription table: concurrent reads, exclusive mutation.
    mutable std::shared_mutex table_mutex_;
    struct Entry {
        std::weak_ptr<Session> session;
        const Session* key;
        std::string filter;
        std::uint8_t qos;
    };
    std::vector<Entry> table_;

    // Serialises fan-outs so that delivery order is consistent across
    // subscribers.
    std::mutex delivery_mutex_;
};

/// Starts a broker listening on `host:port` (port 0 = ephemeral).
std::unique_ptr<Broker> broker_serve(const std::string& host, std::uint16_t port, BrokerLimits limits = {},
                                     BrokerHooks hooks = {});

}  // namespace teach::bus
