#include "teach/app/bridge.hpp"

#include "teach/bus/client.hpp"
#include "teach/bus/schema.hpp"
#include "teach/bus/topic.hpp"
#include "teach/common/error.hpp"
#include "teach/sim/profile.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <deque>
#include <future>
#include <set>
#include <thread>
#include <unistd.h>

namespace teach::app {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

// Frames queued for one client before it is dropped as a slow consumer.
constexpr std::size_t kMaxPending = 20'000;

std::string error_frame(const std::string& message) { return json{{"error", message}}.dump(); }

}  // namespace

bus::Envelope parse_upstream_frame(const std::string& text) {
    json frame;
    try {
        frame = json::parse(text);
    } catch (const json::parse_error&) {
        throw ValidationError("frame is not valid JSON");
    }
    if (!frame.is_object() || !frame.contains("topic") || !frame.at("topic").is_string() ||
        !frame.contains("payload")) {
        throw ValidationError("frame must be an object with \"topic\" (string) and \"payload\"");
    }
    const auto topic = frame.at("topic").get<std::string>();
    bus::validate_topic(topic);
    if (!bus::topic_matches(bus::topics::kUi, topic)) {
        throw ValidationError("publishing to \"" + topic + "\" is not allowed from the dashboard");
    }
    const auto& payload = frame.at("payload");
    if (topic == bus::topics::kOverride) {
        const auto msg = bus::parse_override(payload);
        if (const auto* v = std::get_if<double>(&msg.value); v && !(*v >= 0 && *v <= 1)) {
            throw ValidationError("stress override must lie in [0, 1]");
        }
        if (const auto* p = std::get_if<std::string>(&msg.value)) sim::parse_profile(*p);
    }
    return bus::Envelope::from_json(topic, payload);
}

std::string downstream_frame(const bus::Envelope& envelope) {
    json payload;
    try {
        payload = envelope.payload_json();
    } catch (const ValidationError&) {
        payload = envelope.payload_text();
    }
    return json{{"topic", envelope.topic()}, {"payload", payload}}.dump();
}

struct Bridge::Impl {
    class Session : public std::enable_shared_from_this<Session> {
    public:
        Session(tcp::socket socket, Impl& owner) : ws_(std::move(socket)), owner_(owner) {}

        void start() {
            ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
                if (ec) return;
                self->owner_.sessions.insert(self);
                self->owner_.count.store(self->owner_.sessions.size());
                self->read();
            });
        }

        void send(std::string text) {
            if (closed_) return;
            if (out_.size() >= kMaxPending) {
                spdlog::warn("bridge: dropping a client that stopped reading");
                close();
                return;
            }
            out_.push_back(std::move(text));
            if (!writing_) write_next();
        }

        void close() {
            if (closed_) return;
            closed_ = true;
            beast::error_code ignored;
            beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ignored);
            beast::get_lowest_layer(ws_).socket().close(ignored);
            owner_.drop(this);
        }

    private:
        void read() {
            ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
                if (ec) {
                    self->close();
                    return;
                }
                const auto text = beast::buffers_to_string(self->buffer_.data());
                self->buffer_.consume(self->buffer_.size());
                self->upstream(text);
                self->read();
            });
        }

        void upstream(const std::string& text) {
            try {
                owner_.client->publish(parse_upstream_frame(text));
            } catch (const ValidationError& e) {
                send(error_frame(e.what()));
            } catch (const std::exception& e) {
                send(error_frame(std::string("bus unavailable: ") + e.what()));
            }
        }

        void write_next() {
            writing_ = true;
            ws_.text(true);
            ws_.async_write(asio::buffer(out_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
                if (ec) {
                    self->close();
                    return;
                }
                self->out_.pop_front();
                if (self->out_.empty() || self->closed_) {
                    self->writing_ = false;
                } else {
                    self->write_next();
                }
            });
        }

        websocket::stream<beast::tcp_stream> ws_;
        Impl& owner_;
        beast::flat_buffer buffer_;
        std::deque<std::string> out_;
        bool writing_ = false;
        bool closed_ = false;
    };

    asio::io_context ioc;
    asio::executor_work_guard<asio::io_context::executor_type> guard{ioc.get_executor()};
    tcp::acceptor acceptor{ioc};
    std::uint16_t port = 0;
    std::unique_ptr<bus::Client> client;
    std::set<std::shared_ptr<Session>> sessions;  // io thread only
    std::atomic<std::size_t> count{0};
    std::atomic<bool> stopping{false};
    std::thread io_thread;
    std::thread forwarder;
    bool stopped = false;

    void drop(Session* s) {
        for (auto it = sessions.begin(); it != sessions.end(); ++it) {
            if (it->get() == s) {
                sessions.erase(it);
                break;
            }
        }
        count.store(sessions.size());
    }

    void accept() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;  // acceptor closed
            std::make_shared<Session>(std::move(socket), *this)->start();
            accept();
        });
    }

    void forward() {
        while (!stopping.load()) {
            auto env = client->receive(std::chrono::milliseconds(50));
            if (!env) continue;
            asio::post(ioc, [this, frame = downstream_frame(*env)] {
                for (const auto& s : std::vector<std::shared_ptr<Session>>(sessions.begin(), sessions.end())) {
                    s->send(frame);
                }
            });
        }
    }
};

Bridge::Bridge(const bus::Address& broker, const std::string& host, std::uint16_t port)
    : impl_(std::make_unique<Impl>()) {
    bus::ClientOptions options;
    options.client_id = "teach-bridge-" + std::to_string(::getpid());
    impl_->client = std::make_unique<bus::Client>(broker, options);
    impl_->client->subscribe(bus::topics::kAll);
    try {
        const tcp::endpoint endpoint(asio::ip::make_address(host), port);
        impl_->acceptor.open(endpoint.protocol());
        impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
        impl_->acceptor.bind(endpoint);
        impl_->acceptor.listen();
        impl_->port = impl_->acceptor.local_endpoint().port();
    } catch (const boost::system::system_error& e) {
        impl_->client->disconnect();
        throw bus::NetError("bridge cannot listen on " + host + ":" + std::to_string(port) + ": " + e.what());
    }
    impl_->accept();
    impl_->io_thread = std::thread([this] { impl_->ioc.run(); });
    impl_->forwarder = std::thread([this] { impl_->forward(); });
}

Bridge::~Bridge() { stop(); }

std::uint16_t Bridge::port() const { return impl_->port; }

std::size_t Bridge::connections() const { return impl_->count.load(); }

void Bridge::stop() {
    if (impl_->stopped) return;
    impl_->stopped = true;
    impl_->stopping.store(true);
    if (impl_->forwarder.joinable()) impl_->forwarder.join();
    std::promise<void> done;
    asio::post(impl_->ioc, [this, &done] {
        beast::error_code ignored;
        impl_->acceptor.close(ignored);
        for (const auto& s : std::vector<std::shared_ptr<Impl::Session>>(impl_->sessions.begin(),
                                                                         impl_->sessions.end())) {
            s->close();
        }
        done.set_value();
    });
    done.get_future().wait();
    impl_->guard.reset();
    impl_->ioc.stop();
    if (impl_->io_thread.joinable()) impl_->io_thread.join();
    impl_->client->disconnect();
}

}  // namespace teach::app
