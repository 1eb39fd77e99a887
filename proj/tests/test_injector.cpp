#include "eftos/injector.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace eftos;
using S = ComponentStatus;

namespace {

SimConfig config(Tick T = 3, Tick R = 2)
{
    SimConfig c;
    c.node_count = 4;
    c.manager_node = NodeId{0};
    c.backup_nodes = {NodeId{1}};
    c.watchdog_timeout_ticks = T;
    c.recovery_ticks = R;
    return c;
}

struct Rig
{
    explicit Rig(SimConfig c, Tick window = 50) : store(c), sim(c, store), inj(sim, store, InjectorOptions{window})
    {
    }
    EventStore store;
    Simulator sim;
    Injector inj;

    void until(Tick t)
    {
        while (sim.tick() < t && !sim.failed())
            inj.advance();
    }
};

FaultSpec spec(FaultKind kind, FaultTarget target, std::optional<Tick> at = std::nullopt)
{
    FaultSpec s;
    s.kind = kind;
    s.target = target;
    s.at_tick = at;
    return s;
}

const ThreadId t20{NodeId{2}, 0};

} // namespace

TEST(Classify, TableIsTotalAndFixed)
{
    EXPECT_EQ(classify(FaultKind::NodeReboot), RoutingClass::SystemLevel);
    EXPECT_EQ(classify(FaultKind::LinkFailure), RoutingClass::SystemLevel);
    EXPECT_EQ(classify(FaultKind::SegViol), RoutingClass::ApplicationLevel);
    EXPECT_EQ(classify(FaultKind::DivZero), RoutingClass::ApplicationLevel);
    EXPECT_EQ(classify(FaultKind::ThreadKill), RoutingClass::ApplicationLevel);
    EXPECT_EQ(classify(FaultKind::WatchdogTimeout), RoutingClass::ApplicationLevel);
    static_assert(classify(FaultKind::NodeReboot) == RoutingClass::SystemLevel);
}

TEST(FaultSpecJson, RoundTripsEveryKind)
{
    const std::vector<FaultSpec> specs{
        spec(FaultKind::DivZero, ThreadId{NodeId{1}, 1}, 4),
        spec(FaultKind::SegViol, ThreadId{NodeId{1}, 0}),
        spec(FaultKind::LinkFailure, LinkTarget{NodeId{0}, NodeId{2}}, 15),
        spec(FaultKind::NodeReboot, NodeId{3}),
        spec(FaultKind::ThreadKill, t20, 10),
        spec(FaultKind::WatchdogTimeout, WatchdogRef{NodeId{2}, std::nullopt}),
        spec(FaultKind::WatchdogTimeout, WatchdogRef{NodeId{2}, 1u}),
    };
    for (auto s : specs)
    {
        s.request_id = "r";
        EXPECT_EQ(fault_from_json(to_json(s)), s) << to_json(s).dump();
    }
    EXPECT_EQ(to_json(specs[0]).dump(), R"({"at_tick":4,"kind":"trap-divzero","request_id":"","target":[1,1]})");
}

TEST(FaultSpecJson, MalformedBodiesRejected)
{
    for (const char* body : {R"({"kind":"kill-thread","target":[2]})", R"({"kind":"explode","target":[1]})",
                             R"({"kind":"reboot"})", R"({"kind":"reboot","target":[-1]})",
                             R"({"kind":"reboot","target":"3"})"})
        EXPECT_THROW(fault_from_json(nlohmann::json::parse(body)), InvalidTarget) << body;
}

TEST(Validate, OutOfRangeTargets)
{
    EXPECT_THROW(validate(spec(FaultKind::ThreadKill, ThreadId{NodeId{9}, 0}), config()), InvalidTarget);
    EXPECT_THROW(validate(spec(FaultKind::LinkFailure, LinkTarget{NodeId{1}, NodeId{1}}), config()), InvalidTarget);
    EXPECT_THROW(validate(spec(FaultKind::NodeReboot, ThreadId{NodeId{1}, 0}), config()), InvalidTarget);
    EXPECT_NO_THROW(validate(spec(FaultKind::NodeReboot, NodeId{3}), config()));
}

TEST(Inject, ReceiptRouting)
{
    Rig rig(config());
    EXPECT_EQ(rig.inj.inject(spec(FaultKind::NodeReboot, NodeId{3})).routing, RoutingClass::SystemLevel);
    EXPECT_EQ(rig.inj.inject(spec(FaultKind::WatchdogTimeout, WatchdogRef{NodeId{2}, std::nullopt})).routing,
              RoutingClass::ApplicationLevel);
}

TEST(Inject, DefaultsToNextTickAndAutoIds)
{
    Rig rig(config());
    rig.until(5);
    const auto r = rig.inj.inject(spec(FaultKind::NodeReboot, NodeId{3}));
    EXPECT_EQ(r.scheduled_tick, 6u);
    EXPECT_EQ(r.request_id, "inj-1");
    EXPECT_FALSE(r.marker_event_id.has_value());
}

TEST(Inject, PastTickDuplicateIdAndOverlapRejected)
{
    Rig rig(config());
    rig.until(5);
    EXPECT_THROW(rig.inj.inject(spec(FaultKind::NodeReboot, NodeId{3}, 4)), InvalidTarget);
    auto a = spec(FaultKind::NodeReboot, NodeId{3}, 8);
    a.request_id = "same";
    rig.inj.inject(a);
    auto b = spec(FaultKind::NodeReboot, NodeId{2}, 8);
    b.request_id = "same";
    EXPECT_THROW(rig.inj.inject(b), ConflictError);
    EXPECT_THROW(rig.inj.inject(spec(FaultKind::ThreadKill, ThreadId{NodeId{3}, 1}, 20)), InvalidTarget);
    EXPECT_NO_THROW(rig.inj.inject(spec(FaultKind::ThreadKill, ThreadId{NodeId{2}, 1}, 20)));
}

TEST(Inject, OverlapAllowedOnceResolved)
{
    Rig rig(config());
    const auto r = rig.inj.inject(spec(FaultKind::NodeReboot, NodeId{3}, 1));
    rig.until(4);
    ASSERT_TRUE(rig.inj.observe(r.request_id).resolved);
    EXPECT_NO_THROW(rig.inj.inject(spec(FaultKind::ThreadKill, ThreadId{NodeId{3}, 0})));
}

TEST(Inject, ThreadKillMarkerThenFaultyAfterTimeout)
{
    Rig rig(config(3));
    const auto r = rig.inj.inject(spec(FaultKind::ThreadKill, t20, 10));
    rig.until(20);
    const auto receipt = *rig.inj.receipt(r.request_id);
    ASSERT_TRUE(receipt.marker_event_id);
    EXPECT_EQ(*receipt.marker_tick, 10u);
    const auto marker = rig.store.read_event(*receipt.marker_event_id);
    EXPECT_EQ(marker.kind, EventKind::Injection);
    EXPECT_EQ(marker.tick, 10u);
    Tick faulty = 0;
    for (const auto& e : rig.store.events())
        if (e.transition && e.transition->to == S::Faulty)
            faulty = e.tick;
    EXPECT_EQ(faulty, 13u);
}

TEST(Inject, LinkFailureIsImmediate)
{
    Rig rig(config());
    const auto r = rig.inj.inject(spec(FaultKind::LinkFailure, LinkTarget{NodeId{0}, NodeId{2}}, 0));
    rig.inj.execute_due();
    EXPECT_FALSE(rig.sim.link_up(NodeId{0}, NodeId{2}));
    const auto receipt = *rig.inj.receipt(r.request_id);
    const auto events = rig.store.events_after(*receipt.marker_event_id - 1);
    ASSERT_GE(events.size(), 2u);
    EXPECT_EQ(events[0].kind, EventKind::Injection);
    EXPECT_EQ(events[1].kind, EventKind::Link);
    EXPECT_EQ(events[0].tick, events[1].tick);
}

TEST(Inject, UndetectedSegViolAfterWindow)
{
    auto c = config();
    c.untrapped_threads = {ThreadId{NodeId{1}, 0}};
    c.unwatched_threads = {ThreadId{NodeId{1}, 0}};
    Rig rig(c, 20);
    const auto r = rig.inj.inject(spec(FaultKind::SegViol, ThreadId{NodeId{1}, 0}, 2));
    rig.until(21);
    auto fb = rig.inj.observe(r.request_id);
    EXPECT_FALSE(fb.resolved);
    rig.until(22);
    fb = rig.inj.observe(r.request_id);
    EXPECT_TRUE(fb.resolved);
    EXPECT_FALSE(fb.detected);
    EXPECT_FALSE(fb.detection_latency_ticks || fb.isolation_latency_ticks || fb.recovery_latency_ticks);
    EXPECT_EQ(fb.final_status, S::OK);
    for (const auto& e : rig.store.events())
        EXPECT_FALSE(e.transition.has_value());
}

TEST(Observe, RebootHasZeroDetectionLatency)
{
    Rig rig(config(3, 2));
    const auto r = rig.inj.inject(spec(FaultKind::NodeReboot, NodeId{3}, 4));
    rig.until(10);
    const auto fb = rig.inj.observe(r.request_id);
    EXPECT_TRUE(fb.detected);
    EXPECT_EQ(fb.detection_latency_ticks, 0u);
    EXPECT_EQ(fb.isolation_latency_ticks, 0u);
    EXPECT_EQ(fb.recovery_latency_ticks, 2u);
    EXPECT_EQ(fb.final_status, S::OK);
    EXPECT_TRUE(fb.resolved);
}

TEST(Observe, ThreadKillLatencies)
{
    Rig rig(config(3, 2));
    const auto r = rig.inj.inject(spec(FaultKind::ThreadKill, t20, 5));
    rig.until(30);
    const auto fb = rig.inj.observe(r.request_id);
    // Faulty T after the kill, Isolated one tick later, Recovering one more,
    // then recovery_ticks.
    EXPECT_EQ(fb.detection_latency_ticks, 3u);
    EXPECT_EQ(fb.isolation_latency_ticks, 4u);
    EXPECT_EQ(fb.recovery_latency_ticks, 7u);
    const auto receipt = *rig.inj.receipt(r.request_id);
    for (auto id : receipt.resulting_event_ids)
        EXPECT_GT(id, *receipt.marker_event_id);
    EXPECT_TRUE(std::is_sorted(receipt.resulting_event_ids.begin(), receipt.resulting_event_ids.end()));
}

TEST(Inject, ApplicationLevelNeedsAManager)
{
    Rig rig(config());
    // no OK backup and the Manager down: the system fails, no Manager remains
    rig.sim.force_watchdog_timeout(WatchdogRef{NodeId{1}, std::nullopt});
    rig.sim.force_watchdog_timeout(WatchdogRef{NodeId{0}, std::nullopt});
    ASSERT_TRUE(rig.sim.failed());
    const auto before = rig.store.last_event_id();
    const auto r = rig.inj.inject(spec(FaultKind::ThreadKill, ThreadId{NodeId{3}, 0}, 0));
    EXPECT_TRUE(r.queued);
    rig.inj.execute_due();
    const auto after = rig.store.events_after(before);
    ASSERT_EQ(after.size(), 1u);
    EXPECT_EQ(after[0].kind, EventKind::Injection);
    EXPECT_EQ(rig.sim.thread(ThreadId{NodeId{3}, 0})->life, ThreadLife::Alive);
    EXPECT_TRUE(rig.inj.receipt(r.request_id)->queued);
}

TEST(Inject, ConcurrentSubmissionsAreSerialized)
{
    auto c = config();
    c.node_count = 6;
    Rig rig(c);
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (std::uint32_t n = 0; n < 4; ++n)
        threads.emplace_back([&, n] {
            auto s = spec(FaultKind::WatchdogTimeout, WatchdogRef{NodeId{2 + n}, std::nullopt}, 3);
            s.request_id = "w" + std::to_string(n);
            rig.inj.inject(s);
            ++ok;
        });
    std::thread driver([&] { rig.until(8); });
    for (auto& t : threads)
        t.join();
    driver.join();
    EXPECT_EQ(ok.load(), 4);
    rig.until(10);
    for (std::uint32_t n = 0; n < 4; ++n)
        EXPECT_TRUE(rig.inj.receipt("w" + std::to_string(n))->marker_event_id.has_value());
}

// --- loop ----------------------------------------------------------------

TEST(Loop, WatchedKillPasses)
{
    Rig rig(config());
    const auto report = run_loop({ScenarioEntry{spec(FaultKind::ThreadKill, t20, 3), Expectation::detected(), 1}},
                                 rig.inj);
    ASSERT_EQ(report.iterations.size(), 1u);
    EXPECT_TRUE(report.iterations[0].passed);
    EXPECT_TRUE(report.all_passed());
    EXPECT_NE(report.table().find("PASS"), std::string::npos);
}

TEST(Loop, UnwatchedSegViolFailsDetectedExpectation)
{
    auto c = config();
    c.untrapped_threads = {ThreadId{NodeId{1}, 0}};
    c.unwatched_threads = {ThreadId{NodeId{1}, 0}};
    Rig rig(c, 10);
    const auto report = run_loop(
        {ScenarioEntry{spec(FaultKind::SegViol, ThreadId{NodeId{1}, 0}, 2), Expectation::detected(), 1}}, rig.inj);
    EXPECT_FALSE(report.all_passed());
    EXPECT_NE(report.table().find("FAIL"), std::string::npos);
    EXPECT_EQ(report.final_tick, 12u);
}

TEST(Loop, EmptyScenarioIsPreconditionError)
{
    Rig rig(config());
    EXPECT_THROW(run_loop({}, rig.inj), PreconditionError);
}

TEST(Loop, AbortsOnSystemFailure)
{
    auto c = config();
    c.nodes_without_rtool = {NodeId{1}};
    Rig rig(c);
    const auto report = run_loop(
        {
            ScenarioEntry{spec(FaultKind::WatchdogTimeout, WatchdogRef{NodeId{1}, std::nullopt}, 1),
                          Expectation::killed(), 1},
            ScenarioEntry{spec(FaultKind::NodeReboot, NodeId{0}, 4), Expectation::any(), 2},
            ScenarioEntry{spec(FaultKind::NodeReboot, NodeId{3}, 20), Expectation::any(), 3},
        },
        rig.inj);
    ASSERT_EQ(report.iterations.size(), 2u);
    EXPECT_TRUE(report.iterations[0].passed);
    EXPECT_TRUE(report.system_failed);
    EXPECT_TRUE(report.aborted);
    EXPECT_FALSE(report.all_passed());
    EXPECT_NE(report.table().find("system failed"), std::string::npos);
}

TEST(Loop, PastTickIsRescheduled)
{
    Rig rig(config());
    rig.until(10);
    const auto report = run_loop(
        {ScenarioEntry{spec(FaultKind::NodeReboot, NodeId{2}, 3), Expectation::recovered(), 1}}, rig.inj);
    ASSERT_EQ(report.iterations.size(), 1u);
    EXPECT_TRUE(report.iterations[0].passed);
    EXPECT_NE(report.iterations[0].note.find("rescheduled"), std::string::npos);
}

// --- scenario files --------------------------------------------------------

TEST(Scenario, ParsesEveryDirectiveForm)
{
    const auto entries = parse_scenario(R"(# comment
at 10 kill-thread 2 0

at 15 link-down 0 2   # trailing comment
at 20 reboot 3 expect recovered
at 25 trap segv 1 0 expect undetected
at 30 trap divzero 1 1 id mine
at 40 watchdog-timeout 2
at 41 watchdog-timeout 2 1 expect any
)");
    ASSERT_EQ(entries.size(), 7u);
    EXPECT_EQ(entries[0].spec, spec(FaultKind::ThreadKill, t20, 10));
    EXPECT_EQ(entries[0].line, 2u);
    EXPECT_EQ(entries[0].expect.name, "detected");
    EXPECT_EQ(entries[1].spec, spec(FaultKind::LinkFailure, LinkTarget{NodeId{0}, NodeId{2}}, 15));
    EXPECT_EQ(entries[2].spec, spec(FaultKind::NodeReboot, NodeId{3}, 20));
    EXPECT_EQ(entries[2].expect.name, "recovered");
    EXPECT_EQ(entries[3].spec.kind, FaultKind::SegViol);
    EXPECT_EQ(entries[3].expect.name, "undetected");
    EXPECT_EQ(entries[4].spec.kind, FaultKind::DivZero);
    EXPECT_EQ(entries[4].spec.request_id, "mine");
    EXPECT_EQ(entries[5].spec, spec(FaultKind::WatchdogTimeout, WatchdogRef{NodeId{2}, std::nullopt}, 40));
    EXPECT_EQ(entries[6].spec, spec(FaultKind::WatchdogTimeout, WatchdogRef{NodeId{2}, 1u}, 41));
}

TEST(Scenario, ErrorsNameTheLine)
{
    auto line_of = [](const char* text) -> std::size_t {
        try
        {
            parse_scenario(text);
        }
        catch (const ParseError& e)
        {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of("at 1 reboot 1\nat x reboot 1\n"), 2u);
    EXPECT_EQ(line_of("\n\nat 1 explode 1\n"), 3u);
    EXPECT_EQ(line_of("at 1 kill-thread 1\n"), 1u);
    EXPECT_EQ(line_of("at 1 trap\n"), 1u);
    EXPECT_EQ(line_of("at 1 reboot 1 expect sometimes\n"), 1u);
    EXPECT_EQ(line_of("reboot 1\n"), 1u);
    EXPECT_TRUE(parse_scenario("# nothing\n\n").empty());
}
