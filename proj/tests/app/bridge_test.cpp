#include "teach/app/bridge.hpp"
#include "teach/app/episode.hpp"
#include "teach/bus/broker.hpp"
#include "teach/bus/client.hpp"

#include "app_fixture.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include <functional>
#include <future>
#include <sstream>
#include <thread>

namespace teach::app {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using namespace std::chrono_literals;

/// Blocking dashboard stand-in.
class WsClient {
public:
    explicit WsClient(std::uint16_t port) : ws_(ioc_) {
        asio::ip::tcp::resolver resolver(ioc_);
        asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", "/ws");
    }

    void send(const std::string& text) { ws_.write(asio::buffer(text)); }

    json read() {
        beast::flat_buffer buffer;
        ws_.read(buffer);
        return json::parse(beast::buffers_to_string(buffer.data()));
    }

    /// Reads until `match` accepts a frame.
    json read_until(const std::function<bool(const json&)>& match) {
        for (;;) {
            auto frame = read();
            if (match(frame)) return frame;
        }
    }

private:
    asio::io_context ioc_;
    websocket::stream<asio::ip::tcp::socket> ws_;
};

bool is_error(const json& f) { return f.contains("error"); }

class BridgeTest : public ::testing::Test {
protected:
    void SetUp() override {
        broker_ = bus::broker_serve("127.0.0.1", 0);
        bridge_ = std::make_unique<Bridge>(address(), "127.0.0.1", 0);
    }
    bus::Address address() const { return {"127.0.0.1", broker_->port()}; }

    void wait_for_connections(std::size_t n) {
        for (int i = 0; i < 200 && bridge_->connections() < n; ++i) std::this_thread::sleep_for(10ms);
        ASSERT_EQ(bridge_->connections(), n);
    }

    std::unique_ptr<bus::Broker> broker_;
    std::unique_ptr<Bridge> bridge_;
};

TEST(UpstreamFrame, AcceptsOverridesUnderUi) {
    const auto env = parse_upstream_frame(R"({"topic":"teaching/ui/override","payload":{"ts":1,"kind":"stress","value":0.7}})");
    EXPECT_EQ(env.topic(), bus::topics::kOverride);
    EXPECT_DOUBLE_EQ(env.payload_json().at("value").get<double>(), 0.7);
    EXPECT_NO_THROW(parse_upstream_frame(R"({"topic":"teaching/ui/note","payload":"hi"})"));
}

TEST(UpstreamFrame, Rejections) {
    EXPECT_THROW(parse_upstream_frame(R"({"topic":"teaching/lm/action","payload":{}})"), ValidationError);
    EXPECT_THROW(parse_upstream_frame(R"({"topic":"teaching/ui/#","payload":{}})"), ValidationError);
    EXPECT_THROW(parse_upstream_frame("not json"), ValidationError);
    EXPECT_THROW(parse_upstream_frame(R"(["teaching/ui/override"])"), ValidationError);
    EXPECT_THROW(parse_upstream_frame(R"({"payload":{}})"), ValidationError);
    EXPECT_THROW(parse_upstream_frame(R"({"topic":"teaching/ui/override","payload":{"ts":1,"kind":"stress","value":1.2}})"),
                 ValidationError);
    EXPECT_THROW(parse_upstream_frame(R"({"topic":"teaching/ui/override","payload":{"ts":1,"kind":"profile","value":"fast"}})"),
                 ValidationError);
    EXPECT_THROW(parse_upstream_frame(R"({"topic":"teaching/ui/override","payload":{"ts":1,"kind":"jump"}})"),
                 ValidationError);
}

TEST(DownstreamFrame, CarriesTopicAndPayload) {
    const auto frame = json::parse(downstream_frame(bus::make_envelope(bus::StressMsg{2.5, 0.25})));
    EXPECT_EQ(frame.at("topic"), bus::topics::kStress);
    EXPECT_EQ(frame.at("payload"), (json{{"ts", 2.5}, {"stress", 0.25}}));
}

TEST_F(BridgeTest, BusTrafficReachesDashboardUnchanged) {
    WsClient ws(bridge_->port());
    wait_for_connections(1);
    auto pub = bus::client_connect(address(), "pub");
    const auto env = bus::make_envelope(bus::StressMsg{3.0, 0.42});
    pub->publish(env);
    const auto frame = ws.read();
    EXPECT_EQ(frame.at("topic"), bus::topics::kStress);
    EXPECT_EQ(frame.at("payload"), env.payload_json());
}

TEST_F(BridgeTest, UpstreamOverrideIsPublished) {
    auto sub = bus::client_connect(address(), "sub");
    sub->subscribe(bus::topics::kUi);
    WsClient ws(bridge_->port());
    wait_for_connections(1);
    ws.send(R"({"topic":"teaching/ui/override","payload":{"ts":0,"kind":"stress","value":0.7}})");
    const auto got = sub->receive(2s);
    ASSERT_TRUE(got);
    EXPECT_EQ(got->topic(), bus::topics::kOverride);
    EXPECT_DOUBLE_EQ(got->payload_json().at("value").get<double>(), 0.7);
    // The echo reaches the dashboard too.
    const auto echo = ws.read();
    EXPECT_EQ(echo.at("topic"), bus::topics::kOverride);
}

TEST_F(BridgeTest, RejectedFramesKeepTheConnection) {
    auto sub = bus::client_connect(address(), "sub");
    sub->subscribe(bus::topics::kAll);
    WsClient ws(bridge_->port());
    wait_for_connections(1);

    ws.send(R"({"topic":"teaching/lm/action","payload":{"ts":0,"profile":"aggressive","probs":[0,0,1]}})");
    auto frame = ws.read();
    ASSERT_TRUE(is_error(frame)) << frame.dump();
    EXPECT_NE(frame.at("error").get<std::string>().find("not allowed"), std::string::npos);

    ws.send("{{{");
    EXPECT_TRUE(is_error(ws.read()));
    EXPECT_FALSE(sub->receive(300ms)) << "a rejected frame reached the bus";

    ws.send(R"({"topic":"teaching/ui/override","payload":{"ts":0,"kind":"pause"}})");
    ASSERT_TRUE(sub->receive(2s));
    EXPECT_EQ(bridge_->connections(), 1u);
}

TEST_F(BridgeTest, FansOutToSeveralClientsAndStopsCleanly) {
    WsClient a(bridge_->port());
    WsClient b(bridge_->port());
    wait_for_connections(2);
    auto pub = bus::client_connect(address(), "pub");
    pub->publish(bus::make_envelope(bus::StressMsg{1.0, 0.1}));
    EXPECT_EQ(a.read().at("topic"), bus::topics::kStress);
    EXPECT_EQ(b.read().at("topic"), bus::topics::kStress);
    bridge_->stop();
    bridge_->stop();
    EXPECT_EQ(bridge_->connections(), 0u);
}

TEST(BridgeBind, PortInUseIsANetError) {
    auto broker = bus::broker_serve("127.0.0.1", 0);
    Bridge first({"127.0.0.1", broker->port()}, "127.0.0.1", 0);
    EXPECT_THROW(Bridge({"127.0.0.1", broker->port()}, "127.0.0.1", first.port()), bus::NetError);
}

// Dashboard-driven loop: the run pauses itself, the dashboard injects a
// felt-stress value of 0.7 and resumes it.
TEST_F(BridgeTest, DashboardStressOverrideReachesAgentFeatures) {
    auto config = testing_support::short_run_config(30);
    config.broker = {BrokerKind::External, "127.0.0.1", broker_->port()};
    ScriptedEvent pause;
    pause.t = 12;
    pause.message.kind = bus::OverrideKind::Pause;
    config.events = {pause};

    WsClient ws(bridge_->port());
    wait_for_connections(1);
    auto dashboard = std::async(std::launch::async, [&] {
        ws.read_until([](const json& f) {
            return f.value("topic", "") == bus::topics::kOverride && f.at("payload").at("kind") == "pause";
        });
        ws.send(R"({"topic":"teaching/ui/override","payload":{"ts":12,"kind":"stress","value":0.7}})");
        ws.send(R"({"topic":"teaching/ui/override","payload":{"ts":12,"kind":"resume"}})");
    });

    agent::Agent agent(agent::AgentConfig{});
    std::ostringstream log;
    EpisodeOptions options;
    options.agent = &agent;
    options.log = &log;
    options.broker = address();
    const auto result = run_episode(config, episode_setup(config), testing_support::test_esn(), options);
    dashboard.get();
    ASSERT_TRUE(result.summary.ok) << result.summary.cause;
    EXPECT_EQ(result.summary.overrides, 3);

    std::istringstream lines(log.str());
    std::vector<json> records;
    for (std::string line; std::getline(lines, line);) records.push_back(json::parse(line));
    ASSERT_EQ(records.size(), 601u);
    const auto& at_pause = records.at(240).at("overrides");
    ASSERT_EQ(at_pause.size(), 3u);
    EXPECT_EQ(at_pause[1].at("kind"), "stress");
    EXPECT_DOUBLE_EQ(at_pause[1].at("value").get<double>(), 0.7);

    bool checked = false;
    for (const auto& d : result.decisions) {
        if (d.ts == 15.0) {
            EXPECT_DOUBLE_EQ(d.features.phi(0), 0.7);
            checked = true;
        }
    }
    EXPECT_TRUE(checked);
}

}  // namespace
}  // namespace teach::app
