#include "eftos/notify.hpp"
#include "eftos/simulator.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace eftos;

TEST(Frame, RoundTripsAcrossArbitrarySplits)
{
    const std::string a = encode_frame(std::string_view("{\"kind\":\"Hello\"}"));
    const std::string b = encode_frame(std::string_view(""));
    const std::string c = encode_frame(nlohmann::json{{"kind", "Transition"}, {"event_id", 7}});
    const std::string wire = a + b + c;
    for (std::size_t chunk = 1; chunk <= wire.size(); ++chunk)
    {
        FrameReader r;
        std::vector<std::string> out;
        for (std::size_t i = 0; i < wire.size(); i += chunk)
        {
            r.feed(std::string_view(wire).substr(i, chunk));
            while (auto p = r.next())
                out.push_back(*p);
        }
        ASSERT_EQ(out.size(), 3u) << "chunk " << chunk;
        EXPECT_EQ(out[0], "{\"kind\":\"Hello\"}");
        EXPECT_EQ(out[1], "");
        EXPECT_EQ(nlohmann::json::parse(out[2])["event_id"], 7);
        EXPECT_TRUE(r.empty());
    }
}

TEST(Frame, LengthIsBigEndian)
{
    const auto f = encode_frame(std::string(300, 'x'));
    ASSERT_EQ(f.size(), 304u);
    EXPECT_EQ(static_cast<unsigned char>(f[0]), 0u);
    EXPECT_EQ(static_cast<unsigned char>(f[1]), 0u);
    EXPECT_EQ(static_cast<unsigned char>(f[2]), 1u);
    EXPECT_EQ(static_cast<unsigned char>(f[3]), 44u);
}

TEST(Frame, OversizedLengthIsAProtocolError)
{
    FrameReader r;
    r.feed(std::string("\x7f\x00\x00\x00", 4));
    EXPECT_THROW(r.next(), ProtocolError);
}

TEST(NotificationJson, RoundTrip)
{
    const Notification h{NotificationKind::Hello, 0, 0, std::string("/tmp/x")};
    const Notification t{NotificationKind::Transition, 17, 9, std::nullopt};
    const Notification s{NotificationKind::Shutdown, 0, 40, std::nullopt};
    for (const auto& n : {h, t, s})
        EXPECT_EQ(notification_from_json(to_json(n)), n);
}

TEST(NotificationJson, RejectsMalformed)
{
    EXPECT_THROW(notification_from_json(nlohmann::json::array()), ProtocolError);
    EXPECT_THROW(notification_from_json({{"event_id", 1}}), ProtocolError);
    EXPECT_THROW(notification_from_json({{"kind", "Bogus"}}), ProtocolError);
    EXPECT_THROW(notification_from_json({{"kind", "Transition"}, {"event_id", -3}}), ProtocolError);
    EXPECT_THROW(notification_from_json({{"kind", "Transition"}, {"event_id", "4"}}), ProtocolError);
    EXPECT_THROW(notification_from_json({{"kind", "Transition"}, {"tick", 2}}), ProtocolError);
}

namespace {

/// Records what was on disk at the moment each notification was sent.
class ProbeNotifier final : public Notifier
{
public:
    explicit ProbeNotifier(const EventStore& store) : store_(store) {}
    void send(const Notification& n) override
    {
        seen.push_back(n);
        on_disk.push_back(n.kind == NotificationKind::Transition && store_.read_event(n.event_id).event_id == n.event_id);
    }
    std::vector<Notification> seen;
    std::vector<bool> on_disk;

private:
    const EventStore& store_;
};

} // namespace

TEST(MonitorClient, StoresBeforeNotifyingEveryEvent)
{
    test::TempDir dir("notify");
    SimConfig c;
    EventStore store(c, dir.path());
    ProbeNotifier probe(store);
    MonitorClient client(store, probe);
    client.hello(0);
    Simulator sim(c, client);
    sim.kill_thread(ThreadId{NodeId{2}, 0});
    for (int i = 0; i < 12; ++i)
        sim.step();
    client.shutdown(sim.tick());

    ASSERT_GE(probe.seen.size(), 3u);
    EXPECT_EQ(probe.seen.front().kind, NotificationKind::Hello);
    ASSERT_TRUE(probe.seen.front().store);
    EXPECT_EQ(std::filesystem::path(*probe.seen.front().store), std::filesystem::absolute(dir.path()));
    EXPECT_EQ(probe.seen.back().kind, NotificationKind::Shutdown);
    EXPECT_EQ(probe.seen.back().tick, sim.tick());

    std::vector<EventId> ids;
    for (std::size_t i = 1; i + 1 < probe.seen.size(); ++i)
    {
        EXPECT_EQ(probe.seen[i].kind, NotificationKind::Transition);
        EXPECT_TRUE(probe.on_disk[i]);
        ids.push_back(probe.seen[i].event_id);
    }
    ASSERT_EQ(ids.size(), store.last_event_id());
    for (std::size_t i = 0; i < ids.size(); ++i)
        EXPECT_EQ(ids[i], i + 1);
}

TEST(CaptureFile, OneLinePerNotification)
{
    test::TempDir dir("capture");
    {
        CaptureFileNotifier cap(dir / "n.jsonl");
        cap.send({NotificationKind::Hello, 0, 0, std::string("/s")});
        cap.send({NotificationKind::Transition, 1, 0, std::nullopt});
        cap.send({NotificationKind::Shutdown, 0, 5, std::nullopt});
    }
    std::ifstream in(dir / "n.jsonl");
    std::vector<Notification> got;
    for (std::string line; std::getline(in, line);)
        got.push_back(notification_from_json(nlohmann::json::parse(line)));
    ASSERT_EQ(got.size(), 3u);
    EXPECT_EQ(got[1].event_id, 1u);
    EXPECT_EQ(got[2].kind, NotificationKind::Shutdown);
}

TEST(CaptureFile, UnwritablePathIsAnIoError)
{
    EXPECT_THROW(CaptureFileNotifier("/nonexistent-dir/x/n.jsonl"), IoError);
}

TEST(Address, Parse)
{
    const auto a = net::parse_address("127.0.0.1:8080");
    EXPECT_EQ(a.host, "127.0.0.1");
    EXPECT_EQ(a.port, 8080);
    EXPECT_EQ(net::parse_address(":0").port, 0);
    EXPECT_THROW(net::parse_address("nohost"), ConfigError);
    EXPECT_THROW(net::parse_address("h:99999"), ConfigError);
    EXPECT_THROW(net::parse_address("h:x1"), ConfigError);
}

TEST(TcpNotifier, ConnectRefusedIsAnIoError)
{
    auto l = net::listen_tcp({"127.0.0.1", 0});
    const auto port = net::local_port(l);
    l.close();
    EXPECT_THROW(TcpNotifier({"127.0.0.1", port}), IoError);
}

TEST(TcpNotifier, AnswersInjectFramesThroughTheHandler)
{
    auto l = net::listen_tcp({"127.0.0.1", 0});
    TcpNotifier notifier({"127.0.0.1", net::local_port(l)}, [](const nlohmann::json& fault) {
        return nlohmann::json{{"ok", true}, {"echo", fault}};
    });
    auto conn = net::accept_tcp(l, std::chrono::seconds(5));
    ASSERT_TRUE(conn.valid());
    notifier.send({NotificationKind::Hello, 0, 0, std::nullopt});
    conn.send_all(encode_frame(nlohmann::json{{"kind", "Inject"}, {"corr", 9}, {"fault", {{"k", 1}}}}));

    FrameReader r;
    std::vector<nlohmann::json> got;
    char buf[1024];
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (got.size() < 2 && std::chrono::steady_clock::now() < deadline)
    {
        const long n = conn.recv_some(buf, sizeof buf, std::chrono::milliseconds(100));
        if (n <= 0)
            continue;
        r.feed(std::string_view(buf, static_cast<std::size_t>(n)));
        while (auto p = r.next())
            got.push_back(nlohmann::json::parse(*p));
    }
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0]["kind"], "Hello");
    EXPECT_EQ(got[1]["kind"], "Receipt");
    EXPECT_EQ(got[1]["corr"], 9);
    EXPECT_EQ(got[1]["echo"]["k"], 1);
}
