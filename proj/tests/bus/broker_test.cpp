#include "teach/bus/broker.hpp"
#include "teach/bus/client.hpp"
#include "teach/bus/topic.hpp"
#include "teach/common/error.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <mutex>
#include <random>
#include <set>

namespace teach::bus {
namespace {

using namespace std::chrono_literals;

Envelope text(const std::string& topic, const std::string& body, std::uint8_t qos = 0) {
    return Envelope(topic, Bytes(body.begin(), body.end()), qos);
}

class BrokerTest : public ::testing::Test {
protected:
    void start(BrokerLimits limits = {}, BrokerHooks hooks = {}) {
        broker_ = broker_serve("127.0.0.1", 0, limits, std::move(hooks));
    }
    void SetUp() override { start(); }

    std::unique_ptr<Client> client(const std::string& id, ClientOptions options = {}) {
        options.client_id = id;
        return std::make_unique<Client>(Address{"127.0.0.1", broker_->port()}, std::move(options));
    }

    std::unique_ptr<Broker> broker_;
};

TEST_F(BrokerTest, FanOutToEverySubscriber) {
    auto a = client("a");
    auto b = client("b");
    auto pub = client("pub");
    EXPECT_EQ(a->subscribe("teaching/sensors/#"), 0);
    EXPECT_EQ(b->subscribe("teaching/sensors/#"), 0);
    pub->publish(text("teaching/sensors/eda", "1"));
    for (auto* c : {a.get(), b.get()}) {
        auto got = c->receive(2s);
        ASSERT_TRUE(got);
        EXPECT_EQ(got->topic(), "teaching/sensors/eda");
        EXPECT_EQ(got->payload_text(), "1");
        EXPECT_FALSE(c->receive(200ms)) << "exactly one copy";
    }
}

TEST_F(BrokerTest, OverlappingFiltersDeliverOnce) {
    auto a = client("a");
    a->subscribe("teaching/#");
    a->subscribe("teaching/sensors/+");
    a->publish(text("teaching/sensors/eda", "x"));
    EXPECT_TRUE(a->receive(2s));
    EXPECT_FALSE(a->receive(200ms));
}

TEST_F(BrokerTest, NonMatchingSubscriberReceivesNothing) {
    auto a = client("a");
    auto pub = client("pub");
    a->subscribe("teaching/lm/#");
    pub->publish(text("teaching/sensors/eda", "1"));
    EXPECT_FALSE(a->receive(300ms));
}

TEST_F(BrokerTest, SelfReceipt) {
    auto a = client("a");
    a->subscribe("teaching/lm/stress");
    a->publish(text("teaching/lm/stress", "{\"stress\":0.5}"));
    auto got = a->receive(2s);
    ASSERT_TRUE(got);
    EXPECT_EQ(got->payload_text(), "{\"stress\":0.5}");
}

TEST_F(BrokerTest, PublishOrderPreserved) {
    auto sub = client("sub");
    auto pub = client("pub");
    sub->subscribe("seq/#");
    for (int i = 1; i <= 1000; ++i) {
        pub->publish(text("seq/a", std::to_string(i)));
    }
    for (int i = 1; i <= 1000; ++i) {
        auto got = sub->receive(5s);
        ASSERT_TRUE(got) << "missing " << i;
        ASSERT_EQ(got->payload_text(), std::to_string(i));
    }
}

TEST_F(BrokerTest, InvalidFilterRejectedBeforeSending) {
    auto a = client("a");
    EXPECT_THROW(a->subscribe("a/#/b"), ValidationError);
    EXPECT_TRUE(a->connected());
}

TEST_F(BrokerTest, UnsubscribeStopsDelivery) {
    auto a = client("a");
    a->subscribe("x/#");
    a->unsubscribe("x/#");
    a->publish(text("x/y", "1"));
    EXPECT_FALSE(a->receive(300ms));
}

TEST_F(BrokerTest, Qos1PublishResolvesAfterPuback) {
    auto sub = client("sub");
    auto pub = client("pub");
    EXPECT_EQ(sub->subscribe("q/#", 1), 1);
    pub->publish(text("q/1", "hello", 1));
    auto got = sub->receive(2s);
    ASSERT_TRUE(got);
    EXPECT_EQ(got->qos(), 1);
}

TEST_F(BrokerTest, GrantedQosCappedAtOne) {
    // Raw SUBSCRIBE asking for QoS 2 must be granted 1.
    Socket s = connect_tcp("127.0.0.1", broker_->port(), 2s);
    s.write_all(encode_packet(Connect{"raw", 30}));
    auto connack = read_frame(s, 1024, 2000ms);
    ASSERT_EQ(connack.status, ReadStatus::Ok);
    s.write_all(encode_packet(Subscribe{3, {{"a/b", 2}, {"a/#/b", 0}}}));
    auto suback = read_frame(s, 1024, 2000ms);
    ASSERT_EQ(suback.status, ReadStatus::Ok);
    EXPECT_EQ(std::get<Suback>(decode_packet(suback.frame)), (Suback{3, {1, kSubackFailure}}));
}

TEST(BrokerFaults, DroppedPubackCausesOneDupRedeliveryAndNoDuplicate) {
    std::atomic<int> dropped{0};
    std::atomic<int> dup_publishes{0};
    std::atomic<int> publishes{0};
    BrokerHooks hooks;
    hooks.drop_outbound = [&](const std::string& id, const Packet& p) {
        if (id == "pub" && std::holds_alternative<Puback>(p) && dropped == 0) {
            ++dropped;
            return true;
        }
        return false;
    };
    hooks.on_inbound = [&](const std::string&, const Packet& p) {
        if (const auto* pub = std::get_if<Publish>(&p)) {
            ++publishes;
            if (pub->dup) ++dup_publishes;
        }
    };
    auto broker = broker_serve("127.0.0.1", 0, {}, hooks);
    ClientOptions options;
    options.ack_timeout = 300ms;
    options.client_id = "sub";
    Client sub({"127.0.0.1", broker->port()}, options);
    sub.subscribe("q/#", 1);
    options.client_id = "pub";
    Client pub({"127.0.0.1", broker->port()}, options);
    pub.publish(text("q/x", "once", 1));

    EXPECT_EQ(dropped, 1);
    EXPECT_EQ(publishes, 2);
    EXPECT_EQ(dup_publishes, 1);
    auto got = sub.receive(2s);
    ASSERT_TRUE(got);
    EXPECT_EQ(got->payload_text(), "once");
    EXPECT_FALSE(sub.receive(500ms)) << "duplicate reached the application";
}

TEST(BrokerFaults, SubscriberSideDuplicateSuppressed) {
    // Subscriber drops its first PUBACK; the broker redelivers with DUP and
    // the client must hand the message to the application exactly once.
    BrokerLimits limits;
    limits.ack_timeout = 300ms;
    auto broker = broker_serve("127.0.0.1", 0, limits);
    std::atomic<int> dropped{0};
    ClientOptions options;
    options.client_id = "sub";
    options.drop_outbound = [&](const Packet& p) {
        if (std::holds_alternative<Puback>(p) && dropped == 0) {
            ++dropped;
            return true;
        }
        return false;
    };
    Client sub({"127.0.0.1", broker->port()}, options);
    sub.subscribe("q/#", 1);
    auto pub = client_connect({"127.0.0.1", broker->port()}, "pub");
    pub->publish(text("q/x", "one", 1));
    ASSERT_TRUE(sub.receive(2s));
    EXPECT_FALSE(sub.receive(1s));
    EXPECT_EQ(dropped, 1);
}

TEST(BrokerFaults, PublisherGivesUpAfterRetries) {
    BrokerHooks hooks;
    hooks.drop_outbound = [](const std::string&, const Packet& p) { return std::holds_alternative<Puback>(p); };
    auto broker = broker_serve("127.0.0.1", 0, {}, hooks);
    ClientOptions options;
    options.client_id = "pub";
    options.ack_timeout = 50ms;
    options.max_retries = 2;
    Client pub({"127.0.0.1", broker->port()}, options);
    EXPECT_THROW(pub.publish(text("q/x", "lost", 1)), AckTimeout);
}

TEST(BrokerFaults, ConnectionRefusedWhenNothingListens) {
    std::uint16_t port = 0;
    {
        Listener l("127.0.0.1", 0);
        port = l.port();
    }
    EXPECT_THROW(client_connect({"127.0.0.1", port}, "x"), ConnectionRefused);
}

TEST(BrokerFaults, ConnackErrorWhenServerFull) {
    BrokerLimits limits;
    limits.max_sessions = 1;
    auto broker = broker_serve("127.0.0.1", 0, limits);
    auto first = client_connect({"127.0.0.1", broker->port()}, "one");
    try {
        client_connect({"127.0.0.1", broker->port()}, "two");
        FAIL() << "second session accepted";
    } catch (const ConnackError& e) {
        EXPECT_EQ(e.code(), ConnectReturn::ServerUnavailable);
    }
}

TEST(BrokerFaults, ProtocolViolationClosesConnection) {
    auto broker = broker_serve("127.0.0.1", 0);
    Socket s = connect_tcp("127.0.0.1", broker->port(), 2s);
    s.write_all(encode_packet(Connect{"raw", 30}));
    ASSERT_EQ(read_frame(s, 1024, 2000ms).status, ReadStatus::Ok);
    s.write_all(Bytes{0xF0, 0x00});
    EXPECT_EQ(read_frame(s, 1024, 2000ms).status, ReadStatus::Eof);
}

TEST(BrokerFaults, OversizedPayloadClosesConnection) {
    BrokerLimits limits;
    limits.max_payload = 16;
    auto broker = broker_serve("127.0.0.1", 0, limits);
    auto c = client_connect({"127.0.0.1", broker->port()}, "big");
    c->publish(text("a/b", std::string(64, 'x')));
    for (int i = 0; i < 50 && c->connected(); ++i) std::this_thread::sleep_for(20ms);
    EXPECT_FALSE(c->connected());
}

TEST(BrokerFaults, ClientIdTakeover) {
    auto broker = broker_serve("127.0.0.1", 0);
    auto first = client_connect({"127.0.0.1", broker->port()}, "same");
    auto second = client_connect({"127.0.0.1", broker->port()}, "same");
    for (int i = 0; i < 50 && first->connected(); ++i) std::this_thread::sleep_for(20ms);
    EXPECT_FALSE(first->connected());
    EXPECT_TRUE(second->connected());
}

// Delivery set from the broker equals the brute-force matching set.
TEST_F(BrokerTest, FanOutMatchesBruteForce) {
    std::mt19937 rng(99);
    const std::vector<std::string> levels = {"a", "b", "c"};
    auto random_topic = [&] {
        std::string t;
        const int depth = std::uniform_int_distribution<int>(1, 3)(rng);
        for (int i = 0; i < depth; ++i) {
            if (i) t += '/';
            t += levels[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
        }
        return t;
    };
    auto random_filter = [&] {
        std::string f;
        const int depth = std::uniform_int_distribution<int>(1, 3)(rng);
        for (int i = 0; i < depth; ++i) {
            if (i) f += '/';
            const int kind = std::uniform_int_distribution<int>(0, 5)(rng);
            if (kind == 0) f += '+';
            else if (kind == 1 && i + 1 == depth) f += '#';
            else f += levels[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
        }
        return f;
    };

    constexpr int kClients = 6;
    std::vector<std::unique_ptr<Client>> subs;
    std::vector<std::vector<std::string>> filters(kClients);
    for (int c = 0; c < kClients; ++c) {
        subs.push_back(client("sub" + std::to_string(c)));
        for (int k = 0; k < 3; ++k) {
            filters[c].push_back(random_filter());
            subs[c]->subscribe(filters[c].back());
        }
        subs[c]->subscribe("sentinel");
    }
    auto pub = client("pub");
    std::vector<std::string> published;
    for (int i = 0; i < 200; ++i) {
        published.push_back(random_topic());
        pub->publish(text(published.back(), std::to_string(i)));
    }
    pub->publish(text("sentinel", "end"));

    for (int c = 0; c < kClients; ++c) {
        std::set<int> expected;
        for (int i = 0; i < static_cast<int>(published.size()); ++i) {
            for (const auto& f : filters[c]) {
                if (topic_matches(f, published[i])) {
                    expected.insert(i);
                }
            }
        }
        std::set<int> got;
        while (true) {
            auto e = subs[c]->receive(5s);
            ASSERT_TRUE(e) << "sentinel not received by client " << c;
            if (e->topic() == "sentinel") break;
            const int idx = std::stoi(e->payload_text());
            EXPECT_TRUE(got.insert(idx).second) << "duplicate delivery";
        }
        EXPECT_EQ(got, expected) << "client " << c;
    }
}

}  // namespace
}  // namespace teach::bus
