#include "teach/bus/broker.hpp"

#include "teach/bus/topic.hpp"
#include "teach/common/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <map>
#include <set>

namespace teach::bus {

using Clock = std::chrono::steady_clock;

class Session : public std::enable_shared_from_this<Session> {
public:
    Session(Broker& broker, Socket sock) : broker_(broker), sock_(std::move(sock)), peer_(sock_.peer()) {}

    ~Session() {
        close();
        for (auto* t : {&reader_, &writer_}) {
            if (!t->joinable()) continue;
            if (t->get_id() == std::this_thread::get_id()) {
                t->detach();
            } else {
                t->join();
            }
        }
    }

    void start() {
        auto self = shared_from_this();
        reader_ = std::thread([self] { self->read_loop(); });
        writer_ = std::thread([self] { self->write_loop(); });
    }

    void close() {
        {
            std::lock_guard lock(mutex_);
            if (closed_) {
                return;
            }
            closed_ = true;
        }
        sock_.shutdown();
        cv_.notify_all();
    }

    bool finished() const { return finished_.load(); }

    void join() {
        if (reader_.joinable() && reader_.get_id() != std::this_thread::get_id()) reader_.join();
        if (writer_.joinable() && writer_.get_id() != std::this_thread::get_id()) writer_.join();
    }

    const std::string& client_id() const { return client_id_; }
    void set_client_id(std::string id) { client_id_ = std::move(id); }

    /// Queues a PUBLISH for this subscriber. Called under the broker's
    /// delivery mutex.
    void deliver(const Publish& source, std::uint8_t qos) {
        std::lock_guard lock(mutex_);
        if (closed_) {
            return;
        }
        Publish out;
        out.topic = source.topic;
        out.payload = source.payload;
        out.qos = qos;
        if (qos == 1) {
            out.packet_id = allocate_id();
            if (out.packet_id == 0) {
                spdlog::warn("broker: {} has 65535 unacknowledged messages, dropping session", client_id_);
                closed_ = true;
                sock_.shutdown();
                cv_.notify_all();
                return;
            }
            pending_[out.packet_id] = Pending{out, Clock::now() + broker_.limits_.ack_timeout, 0};
        }
        push_locked(std::move(out));
    }

private:
    struct Pending {
        Publish publish;
        Clock::time_point deadline;
        int retries = 0;
    };

    std::uint16_t allocate_id() {
        for (int attempt = 0; attempt < 65535; ++attempt) {
            next_id_ = static_cast<std::uint16_t>(next_id_ == 65535 ? 1 : next_id_ + 1);
            if (!pending_.contains(next_id_)) {
                return next_id_;
            }
        }
        return 0;
    }

    void push_locked(Packet packet) {
        if (outbound_.size() >= broker_.limits_.max_queue) {
            spdlog::warn("broker: outbound queue of {} full, dropping session", client_id_);
            closed_ = true;
            sock_.shutdown();
        } else {
            outbound_.push_back(std::move(packet));
        }
        cv_.notify_all();
    }

    void push(Packet packet) {
        std::lock_guard lock(mutex_);
        if (!closed_) {
            push_locked(std::move(packet));
        }
    }

    void write_loop() {
        std::unique_lock lock(mutex_);
        while (true) {
            auto next_deadline = Clock::time_point::max();
            for (const auto& [id, p] : pending_) {
                next_deadline = std::min(next_deadline, p.deadline);
            }
            cv_.wait_until(lock, next_deadline, [&] {
                return closed_ || !outbound_.empty() || Clock::now() >= next_deadline;
            });
            if (closed_) {
                return;
            }
            const auto now = Clock::now();
            for (auto& [id, p] : pending_) {
                if (p.deadline > now) {
                    continue;
                }
                if (p.retries >= broker_.limits_.max_retries) {
                    spdlog::warn("broker: {} did not acknowledge packet {} after {} retries, closing", client_id_, id,
                                 p.retries);
                    closed_ = true;
                    sock_.shutdown();
                    return;
                }
                ++p.retries;
                p.deadline = now + broker_.limits_.ack_timeout;
                Publish again = p.publish;
                again.dup = true;
                outbound_.push_back(std::move(again));
            }
            std::deque<Packet> batch;
            batch.swap(outbound_);
            lock.unlock();
            try {
                for (const auto& packet : batch) {
                    if (broker_.hooks_.drop_outbound && broker_.hooks_.drop_outbound(client_id_, packet)) {
                        continue;
                    }
                    sock_.write_all(encode_packet(packet));
                }
            } catch (const std::exception& e) {
                spdlog::debug("broker: write to {} failed: {}", client_id_, e.what());
                lock.lock();
                closed_ = true;
                sock_.shutdown();
                return;
            }
            lock.lock();
        }
    }

    void read_loop() {
        try {
            if (handshake()) {
                serve();
            }
        } catch (const DecodeError& e) {
            spdlog::info("broker: protocol violation from {} ({}): {}", client_id_, peer_, e.what());
        } catch (const std::exception& e) {
            spdlog::info("broker: session {} ended: {}", client_id_, e.what());
        }
        close();
        broker_.unregister_session(this);
        finished_ = true;
    }

    std::size_t max_frame() const { return broker_.limits_.max_payload + 65535 + 16; }

    bool handshake() {
        auto first = read_frame(sock_, max_frame(), broker_.limits_.connect_timeout);
        if (first.status != ReadStatus::Ok) {
            return false;
        }
        const Packet packet = decode_packet(first.frame);
        if (broker_.hooks_.on_inbound) {
            broker_.hooks_.on_inbound(client_id_, packet);
        }
        const auto* connect = std::get_if<Connect>(&packet);
        if (!connect) {
            spdlog::info("broker: first packet from {} was {}, closing", peer_, packet_name(packet_type(packet)));
            return false;
        }
        if (connect->protocol_name != "MQTT" || connect->protocol_level != 4) {
            sock_.write_all(encode_packet(Connack{false, ConnectReturn::BadProtocolVersion}));
            return false;
        }
        std::string id = connect->client_id;
        if (id.empty()) {
            static std::atomic<unsigned> counter{0};
            id = "auto-" + std::to_string(++counter);
        }
        keepalive_ = connect->keepalive;
        if (!broker_.register_session(shared_from_this(), std::move(id))) {
            sock_.write_all(encode_packet(Connack{false, ConnectReturn::ServerUnavailable}));
            return false;
        }
        spdlog::debug("broker: {} connected from {}", client_id_, peer_);
        push(Connack{false, ConnectReturn::Accepted});
        return true;
    }

    void serve() {
        std::optional<std::chrono::milliseconds> idle_limit;
        if (keepalive_ > 0) {
            idle_limit = std::chrono::milliseconds(keepalive_ * 1500);
        }
        while (true) {
            auto frame = read_frame(sock_, max_frame(), idle_limit);
            if (frame.status == ReadStatus::Timeout) {
                spdlog::info("broker: {} exceeded keepalive, closing", client_id_);
                return;
            }
            if (frame.status == ReadStatus::Eof) {
                return;
            }
            const Packet packet = decode_packet(frame.frame);
            if (broker_.hooks_.on_inbound) {
                broker_.hooks_.on_inbound(client_id_, packet);
            }
            if (!handle(packet)) {
                return;
            }
        }
    }

    bool handle(const Packet& packet) {
        if (const auto* p = std::get_if<Publish>(&packet)) {
            return handle_publish(*p);
        }
        if (const auto* p = std::get_if<Puback>(&packet)) {
            std::lock_guard lock(mutex_);
            pending_.erase(p->packet_id);
            return true;
        }
        if (const auto* p = std::get_if<Subscribe>(&packet)) {
            Suback ack{p->packet_id, {}};
            for (const auto& t : p->topics) {
                if (!is_valid_filter(t.filter)) {
                    ack.return_codes.push_back(kSubackFailure);
                    continue;
                }
                const auto granted = std::min<std::uint8_t>(t.qos, 1);
                broker_.subscribe(shared_from_this(), t.filter, granted);
                ack.return_codes.push_back(granted);
            }
            push(std::move(ack));
            return true;
        }
        if (const auto* p = std::get_if<Unsubscribe>(&packet)) {
            for (const auto& f : p->filters) {
                broker_.unsubscribe(this, f);
            }
            push(Unsuback{p->packet_id});
            return true;
        }
        if (std::holds_alternative<Pingreq>(packet)) {
            push(Pingresp{});
            return true;
        }
        if (std::holds_alternative<Disconnect>(packet)) {
            spdlog::debug("broker: {} disconnected", client_id_);
            return false;
        }
        spdlog::info("broker: unexpected {} from {}, closing", packet_name(packet_type(packet)), client_id_);
        return false;
    }

    bool handle_publish(const Publish& p) {
        try {
            validate_topic(p.topic);
        } catch (const ValidationError& e) {
            spdlog::info("broker: {} published to invalid topic: {}", client_id_, e.what());
            return false;
        }
        if (p.payload.size() > broker_.limits_.max_payload) {
            spdlog::info("broker: {} exceeded max payload ({} bytes), closing", client_id_, p.payload.size());
            return false;
        }
        if (p.qos == 0) {
            broker_.route(p);
            return true;
        }
        // QoS 1: a DUP copy of an id we already routed is a retransmission
        // whose PUBACK got lost; acknowledge it again without re-routing. A
        // fresh (non-DUP) use of the id means the client saw our PUBACK.
        const bool duplicate = p.dup && inbound_seen_.contains(p.packet_id);
        if (!duplicate) {
            inbound_seen_.insert(p.packet_id);
            broker_.route(p);
        }
        push(Puback{p.packet_id});
        return true;
    }

    Broker& broker_;
    Socket sock_;
    std::string peer_;
    std::string client_id_;
    std::uint16_t keepalive_ = 0;

    std::mutex mutex_;
    std::condition_variable cv_;
    bool closed_ = false;
    std::deque<Packet> outbound_;
    std::map<std::uint16_t, Pending> pending_;
    std::uint16_t next_id_ = 0;
    std::set<std::uint16_t> inbound_seen_;  // reader thread only

    std::atomic<bool> finished_{false};
    std::thread reader_;
    std::thread writer_;
};

Broker::Broker(const std::string& host, std::uint16_t port, BrokerLimits limits, BrokerHooks hooks)
    : limits_(limits), hooks_(std::move(hooks)), listener_(host, port) {
    acceptor_ = std::thread([this] { accept_loop(); });
    spdlog::info("broker: listening on {}:{}", host, listener_.port());
}

Broker::~Broker() { stop(); }

void Broker::stop() {
    if (stopping_.exchange(true)) {
        return;
    }
    listener_.close();
    if (acceptor_.joinable()) {
        acceptor_.join();
    }
    std::vector<std::shared_ptr<Session>> sessions;
    {
        std::lock_guard lock(sessions_mutex_);
        sessions.swap(sessions_);
    }
    for (auto& s : sessions) {
        s->close();
    }
    for (auto& s : sessions) {
        s->join();
    }
}

std::size_t Broker::session_count() const {
    std::lock_guard lock(sessions_mutex_);
    return static_cast<std::size_t>(
        std::count_if(sessions_.begin(), sessions_.end(), [](const auto& s) { return !s->finished(); }));
}

void Broker::accept_loop() {
    while (!stopping_) {
        Socket sock = listener_.accept();
        if (!sock.valid()) {
            break;
        }
        if (stopping_) {
            break;
        }
        reap_finished();
        auto session = std::make_shared<Session>(*this, std::move(sock));
        {
            std::lock_guard lock(sessions_mutex_);
            sessions_.push_back(session);
        }
        session->start();
    }
}

void Broker::reap_finished() {
    std::vector<std::shared_ptr<Session>> done;
    {
        std::lock_guard lock(sessions_mutex_);
        auto it = std::stable_partition(sessions_.begin(), sessions_.end(),
                                        [](const auto& s) { return !s->finished(); });
        done.assign(it, sessions_.end());
        sessions_.erase(it, sessions_.end());
    }
    for (auto& s : done) {
        s->join();
    }
}

bool Broker::register_session(const std::shared_ptr<Session>& session, std::string client_id) {
    std::vector<std::shared_ptr<Session>> taken_over;
    {
        std::lock_guard lock(sessions_mutex_);
        session->set_client_id(std::move(client_id));
        std::size_t live = 0;
        for (const auto& s : sessions_) {
            if (s.get() == session.get() || s->finished() || s->client_id().empty()) {
                continue;
            }
            if (s->client_id() == session->client_id()) {
                taken_over.push_back(s);
            } else {
                ++live;
            }
        }
        if (live >= limits_.max_sessions) {
            return false;
        }
    }
    for (auto& s : taken_over) {
        spdlog::info("broker: client id {} reconnected, closing previous session", s->client_id());
        s->close();
        unregister_session(s.get());
    }
    return true;
}

void Broker::unregister_session(const Session* session) {
    std::unique_lock lock(table_mutex_);
    std::erase_if(table_, [session](const Entry& e) { return e.key == session; });
}

void Broker::subscribe(const std::shared_ptr<Session>& session, const std::string& filter, std::uint8_t qos) {
    std::unique_lock lock(table_mutex_);
    for (auto& e : table_) {
        if (e.key == session.get() && e.filter == filter) {
            e.qos = qos;
            return;
        }
    }
    table_.push_back(Entry{session, session.get(), filter, qos});
}

void Broker::unsubscribe(const Session* session, const std::string& filter) {
    std::unique_lock lock(table_mutex_);
    std::erase_if(table_, [&](const Entry& e) { return e.key == session && e.filter == filter; });
}

void Broker::route(const Publish& publish) {
    std::lock_guard delivery(delivery_mutex_);
    std::shared_lock table(table_mutex_);
    // A session subscribed through several matching filters receives one
    // copy at the highest granted QoS.
    std::vector<std::pair<std::shared_ptr<Session>, std::uint8_t>> targets;
    for (const auto& e : table_) {
        if (!topic_matches(e.filter, publish.topic)) {
            continue;
        }
        auto it = std::find_if(targets.begin(), targets.end(), [&](const auto& t) { return t.first.get() == e.key; });
        if (it != targets.end()) {
            it->second = std::max(it->second, e.qos);
            continue;
        }
        if (auto s = e.session.lock()) {
            targets.emplace_back(std::move(s), e.qos);
        }
    }
    for (auto& [session, granted] : targets) {
        session->deliver(publish, std::min(publish.qos, granted));
    }
}

std::unique_ptr<Broker> broker_serve(const std::string& host, std::uint16_t port, BrokerLimits limits,
                                     BrokerHooks hooks) {
    return std::make_unique<Broker>(host, port, limits, std::move(hooks));
}

}  // namespace teach::bus
