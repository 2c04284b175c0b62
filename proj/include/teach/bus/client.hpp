#pragma once

#include "teach/bus/envelope.hpp"
#include "teach/bus/packet.hpp"
#include "teach/bus/socket.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

namespace teach::bus {

/// TCP connect failed (nothing listening, host unreachable).
class ConnectionRefused : public NetError {
public:
    using NetError::NetError;
};

/// The broker answered CONNECT with a non-zero return code.
class ConnackError : public std::runtime_error {
public:
    explicit ConnackError(ConnectReturn code);
    ConnectReturn code() const noexcept { return code_; }

private:
    ConnectReturn code_;
};

/// No acknowledgement after the configured number of retransmissions.
class AckTimeout : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The broker refused a subscription (SUBACK 0x80).
class SubscribeRefused : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The connection dropped while an operation was waiting on it.
class ConnectionLost : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ClientOptions {
    std::string client_id;
    std::uint16_t keepalive = 30;
    std::chrono::milliseconds connect_timeout{5000};
    std::chrono::milliseconds ack_timeout{2000};
    int max_retries = 5;
    /// Test hook: return true to drop a packet instead of sending it.
    std::function<bool(const Packet&)> drop_outbound;
};

/// MQTT 3.1.1 client. One background reader thread; publish/subscribe are
/// callable from any thread; received envelopes go to a single FIFO
/// consumer queue in arrival order.
class Client {
public:
    /// Connects and waits for CONNACK. Throws ConnectionRefused,
    /// ConnackError or AckTimeout (no CONNACK in time).
    Client(const Address& address, ClientOptions options);
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    const std::string& client_id() const noexcept { return options_.client_id; }
    bool connected() const noexcept { return connected_.load(); }

    /// QoS 0 returns once written; QoS 1 returns after PUBACK, retrying with
    /// DUP set on each ack timeout and throwing AckTimeout after
    /// max_retries retransmissions.
    void publish(const Envelope& envelope);

    /// Returns the granted QoS (<= requested). Validates the filter locally
    /// first (ValidationError).
    std::uint8_t subscribe(const std::string& filter, std::uint8_t qos = 0);
    void unsubscribe(const std::string& filter);

    /// Pops the next received envelope; nullopt on timeout, or when the
    /// connection is gone and the queue is drained.
    std::optional<Envelope> receive(std::chrono::milliseconds timeout);

    std::size_t queued() const;

    /// Sends DISCONNECT and closes. Idempotent.
    void disconnect();

private:
    struct Waiter {
        bool done = false;
        std::optional<Packet> response;
    };

    void send(const Packet& packet);
    void read_loop();
    void ping_loop();
    std::uint16_t allocate_id();
    Packet await(std::uint16_t id, const std::shared_ptr<Waiter>& waiter, std::chrono::milliseconds timeout,
                 const char* what);
    void fail_waiters();

    ClientOptions options_;
    Socket sock_;
    std::atomic<bool> connected_{false};

    std::mutex write_mutex_;
    std::chrono::steady_clock::time_point last_send_;

    std::mutex state_mutex_;
    std::condition_variable state_cv_;
    std::map<std::uint16_t, std::shared_ptr<Waiter>> waiters_;
    std::uint16_t next_id_ = 0;
    bool stopping_ = false;

    mutable std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<Envelope> queue_;

    std::set<std::uint16_t> inbound_seen_;  // reader thread only

    std::thread reader_;
    std::thread pinger_;
};

/// Convenience wrapper matching the broker-facing operation set.
std::unique_ptr<Client> client_connect(const Address& address, const std::string& client_id,
                                       std::uint16_t keepalive = 30);

}  // namespace teach::bus
