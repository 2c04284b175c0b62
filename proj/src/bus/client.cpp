#include "teach/bus/client.hpp"

#include "teach/bus/topic.hpp"
#include "teach/common/error.hpp"

#include <spdlog/spdlog.h>

namespace teach::bus {
namespace {

constexpr std::size_t kMaxFrame = kMaxEnvelopePayload + 65535 + 16;

const char* connack_text(ConnectReturn code) {
    switch (code) {
        case ConnectReturn::Accepted: return "accepted";
        case ConnectReturn::BadProtocolVersion: return "unacceptable protocol version";
        case ConnectReturn::IdentifierRejected: return "identifier rejected";
        case ConnectReturn::ServerUnavailable: return "server unavailable";
        case ConnectReturn::BadCredentials: return "bad user name or password";
        case ConnectReturn::NotAuthorized: return "not authorized";
    }
    return "unknown";
}

}  // namespace

ConnackError::ConnackError(ConnectReturn code)
    : std::runtime_error(std::string("broker refused connection: ") + connack_text(code)), code_(code) {}

Client::Client(const Address& address, ClientOptions options) : options_(std::move(options)) {
    try {
        sock_ = connect_tcp(address.host, address.port, options_.connect_timeout);
    } catch (const NetError& e) {
        throw ConnectionRefused(e.what());
    }
    Connect connect;
    connect.client_id = options_.client_id;
    connect.keepalive = options_.keepalive;
    sock_.write_all(encode_packet(connect));
    last_send_ = std::chrono::steady_clock::now();

    auto reply = read_frame(sock_, kMaxFrame, options_.connect_timeout);
    if (reply.status == ReadStatus::Timeout) {
        throw AckTimeout("no CONNACK within connect timeout");
    }
    if (reply.status == ReadStatus::Eof) {
        throw ConnectionRefused("broker closed the connection during CONNECT");
    }
    const Packet packet = decode_packet(reply.frame);
    const auto* connack = std::get_if<Connack>(&packet);
    if (!connack) {
        throw DecodeError(DecodeErrorKind::Malformed, "expected CONNACK");
    }
    if (connack->code != ConnectReturn::Accepted) {
        throw ConnackError(connack->code);
    }
    connected_ = true;
    reader_ = std::thread([this] { read_loop(); });
    if (options_.keepalive > 0) {
        pinger_ = std::thread([this] { ping_loop(); });
    }
}

Client::~Client() {
    disconnect();
}

void Client::disconnect() {
    {
        std::lock_guard lock(state_mutex_);
        if (stopping_) {
            return;
        }
        stopping_ = true;
    }
    if (connected_) {
        try {
            send(Disconnect{});
        } catch (const std::exception&) {
        }
    }
    sock_.shutdown();
    state_cv_.notify_all();
    if (reader_.joinable()) reader_.join();
    if (pinger_.joinable()) pinger_.join();
    connected_ = false;
    queue_cv_.notify_all();
}

void Client::send(const Packet& packet) {
    if (options_.drop_outbound && options_.drop_outbound(packet)) {
        return;
    }
    const auto bytes = encode_packet(packet);
    std::lock_guard lock(write_mutex_);
    sock_.write_all(bytes);
    last_send_ = std::chrono::steady_clock::now();
}

std::uint16_t Client::allocate_id() {
    for (int attempt = 0; attempt < 65535; ++attempt) {
        next_id_ = static_cast<std::uint16_t>(next_id_ == 65535 ? 1 : next_id_ + 1);
        if (!waiters_.contains(next_id_)) {
            return next_id_;
        }
    }
    throw RuntimeFault("no free packet identifiers");
}

Packet Client::await(std::uint16_t id, const std::shared_ptr<Waiter>& waiter, std::chrono::milliseconds timeout,
                     const char* what) {
    std::unique_lock lock(state_mutex_);
    const bool done = state_cv_.wait_for(lock, timeout, [&] { return waiter->done || !connected_ || stopping_; });
    if (waiter->done) {
        waiters_.erase(id);
        return *waiter->response;
    }
    if (!done) {
        throw AckTimeout(std::string("timed out waiting for ") + what);
    }
    waiters_.erase(id);
    throw ConnectionLost(std::string("connection lost while waiting for ") + what);
}

void Client::publish(const Envelope& envelope) {
    if (!connected_) {
        throw ConnectionLost("publish on a closed connection");
    }
    Publish p;
    p.topic = envelope.topic();
    p.payload = envelope.payload();
    p.qos = envelope.qos();
    if (p.qos == 0) {
        send(p);
        return;
    }
    auto waiter = std::make_shared<Waiter>();
    {
        std::lock_guard lock(state_mutex_);
        p.packet_id = allocate_id();
        waiters_[p.packet_id] = waiter;
    }
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
        p.dup = attempt > 0;
        send(p);
        try {
            await(p.packet_id, waiter, options_.ack_timeout, "PUBACK");
            return;
        } catch (const AckTimeout&) {
            spdlog::debug("client {}: PUBACK {} timed out (attempt {})", options_.client_id, p.packet_id,
                          attempt + 1);
        }
    }
    {
        std::lock_guard lock(state_mutex_);
        waiters_.erase(p.packet_id);
    }
    throw AckTimeout("no PUBACK for packet " + std::to_string(p.packet_id) + " after " +
                     std::to_string(options_.max_retries) + " retries");
}

std::uint8_t Client::subscribe(const std::string& filter, std::uint8_t qos) {
    validate_filter(filter);
    if (qos > 1) {
        throw ValidationError("only QoS 0 and 1 are supported");
    }
    auto waiter = std::make_shared<Waiter>();
    Subscribe s;
    {
        std::lock_guard lock(state_mutex_);
        s.packet_id = allocate_id();
        waiters_[s.packet_id] = waiter;
    }
    s.topics.push_back({filter, qos});
    send(s);
    const auto reply = await(s.packet_id, waiter, options_.ack_timeout * (options_.max_retries + 1), "SUBACK");
    const auto* ack = std::get_if<Suback>(&reply);
    if (!ack || ack->return_codes.size() != 1) {
        throw DecodeError(DecodeErrorKind::Malformed, "SUBACK does not match SUBSCRIBE");
    }
    if (ack->return_codes[0] == kSubackFailure) {
        throw SubscribeRefused("broker refused subscription to " + filter);
    }
    return ack->return_codes[0];
}

void Client::unsubscribe(const std::string& filter) {
    validate_filter(filter);
    auto waiter = std::make_shared<Waiter>();
    Unsubscribe u;
    {
        std::lock_guard lock(state_mutex_);
        u.packet_id = allocate_id();
        waiters_[u.packet_id] = waiter;
    }
    u.filters.push_back(filter);
    send(u);
    await(u.packet_id, waiter, options_.ack_timeout * (options_.max_retries + 1), "UNSUBACK");
}

std::optional<Envelope> Client::receive(std::chrono::milliseconds timeout) {
    std::unique_lock lock(queue_mutex_);
    queue_cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || !connected_; });
    if (queue_.empty()) {
        return std::nullopt;
    }
    Envelope e = std::move(queue_.front());
    queue_.pop_front();
    return e;
}

std::size_t Client::queued() const {
    std::lock_guard lock(queue_mutex_);
    return queue_.size();
}

void Client::fail_waiters() {
    {
        std::lock_guard lock(state_mutex_);
        connected_ = false;
    }
    state_cv_.notify_all();
    {
        std::lock_guard lock(queue_mutex_);
    }
    queue_cv_.notify_all();
}

void Client::read_loop() {
    try {
        while (true) {
            auto frame = read_frame(sock_, kMaxFrame, std::nullopt);
            if (frame.status != ReadStatus::Ok) {
                break;
            }
            Packet packet = decode_packet(frame.frame);
            if (auto* p = std::get_if<Publish>(&packet)) {
                bool duplicate = false;
                if (p->qos == 1) {
                    duplicate = p->dup && inbound_seen_.contains(p->packet_id);
                    inbound_seen_.insert(p->packet_id);
                    send(Puback{p->packet_id});
                }
                if (duplicate) {
                    continue;
                }
                try {
                    Envelope e(std::move(p->topic), std::move(p->payload), p->qos);
                    std::lock_guard lock(queue_mutex_);
                    queue_.push_back(std::move(e));
                } catch (const ValidationError& e) {
                    spdlog::warn("client {}: dropping invalid message: {}", options_.client_id, e.what());
                    continue;
                }
                queue_cv_.notify_one();
                continue;
            }
            std::optional<std::uint16_t> id;
            if (const auto* a = std::get_if<Puback>(&packet)) id = a->packet_id;
            else if (const auto* a = std::get_if<Suback>(&packet)) id = a->packet_id;
            else if (const auto* a = std::get_if<Unsuback>(&packet)) id = a->packet_id;
            else if (std::holds_alternative<Pingresp>(packet)) continue;
            else {
                spdlog::warn("client {}: unexpected {} from broker", options_.client_id,
                             packet_name(packet_type(packet)));
                break;
            }
            {
                std::lock_guard lock(state_mutex_);
                auto it = waiters_.find(*id);
                if (it != waiters_.end()) {
                    it->second->done = true;
                    it->second->response = std::move(packet);
                }
            }
            state_cv_.notify_all();
        }
    } catch (const std::exception& e) {
        spdlog::info("client {}: connection ended: {}", options_.client_id, e.what());
    }
    fail_waiters();
}

void Client::ping_loop() {
    const auto interval = std::chrono::milliseconds(options_.keepalive * 500);
    std::unique_lock lock(state_mutex_);
    while (!stopping_ && connected_) {
        state_cv_.wait_for(lock, interval, [&] { return stopping_ || !connected_; });
        if (stopping_ || !connected_) {
            break;
        }
        lock.unlock();
        bool idle = false;
        {
            std::lock_guard wl(write_mutex_);
            idle = std::chrono::steady_clock::now() - last_send_ >= interval;
        }
        if (idle) {
            try {
                send(Pingreq{});
            } catch (const std::exception&) {
            }
        }
        lock.lock();
    }
}

std::unique_ptr<Client> client_connect(const Address& address, const std::string& client_id, std::uint16_t keepalive) {
    ClientOptions options;
    options.client_id = client_id;
    options.keepalive = keepalive;
    return std::make_unique<Client>(address, std::move(options));
}

}  // namespace teach::bus
