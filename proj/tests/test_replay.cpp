#include "eftos/injector.hpp"
#include "eftos/replay.hpp"
#include "eftos/simulator.hpp"
#include "eftos/store.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

using namespace eftos;

namespace {

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary | std::ios::trunc) << text;
}

std::vector<std::string> lines_of(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

std::string join(const std::vector<std::string>& lines)
{
    std::string out;
    for (const auto& l : lines)
        out += l + "\n";
    return out;
}

/// Writes a run with a few recoveries and an election into `dir`.
void record_run(const std::filesystem::path& dir, std::uint64_t seed = 1)
{
    SimConfig c;
    c.rng_seed = seed;
    EventStore store(c, dir);
    Simulator sim(c, store);
    sim.kill_thread(ThreadId{NodeId{2}, 0});
    for (int i = 0; i < 10; ++i)
        sim.step();
    sim.reboot_node(NodeId{0});
    for (int i = 0; i < 6; ++i)
        sim.step();
    sim.raise_trap(ThreadId{NodeId{3}, 1}, TrapKind::DivZero);
    for (int i = 0; i < 6; ++i)
        sim.step();
}

} // namespace

TEST(Replay, CompletedRunAgrees)
{
    test::TempDir dir("replay-ok");
    record_run(dir.path());
    const auto r = replay(dir.path());
    EXPECT_TRUE(r.agree()) << r.text();
    EXPECT_GT(r.events, 10u);
    EXPECT_FALSE(r.first_difference);
    EXPECT_NE(r.text().find("agreement"), std::string::npos);
}

TEST(Replay, RandomRunsAgree)
{
    std::mt19937_64 rng(7);
    for (int run = 0; run < 25; ++run)
    {
        test::TempDir dir("replay-rand");
        SimConfig c;
        c.node_count = 3 + static_cast<std::uint32_t>(rng() % 4);
        c.backup_nodes = {NodeId{1}};
        c.rng_seed = rng();
        c.watchdog_timeout_ticks = 1 + rng() % 5;
        {
            EventStore store(c, dir.path());
            Simulator sim(c, store);
            for (int t = 0; t < 60 && !sim.failed(); ++t)
            {
                const NodeId n{static_cast<std::uint32_t>(rng() % c.node_count)};
                try
                {
                    switch (rng() % 8)
                    {
                    case 0:
                        sim.kill_thread(ThreadId{n, static_cast<std::uint32_t>(rng() % 2)});
                        break;
                    case 1:
                        if (sim.component(n).status == ComponentStatus::OK)
                            sim.reboot_node(n);
                        break;
                    case 2:
                        sim.raise_trap(ThreadId{n, 0}, TrapKind::SegViol);
                        break;
                    default:
                        break;
                    }
                }
                catch (const InvalidTarget&)
                {
                    // thread relocated away or node not OK
                }
                sim.step();
            }
        }
        const auto r = replay(dir.path());
        ASSERT_TRUE(r.agree()) << "run " << run << "\n" << r.text();
    }
}

TEST(Replay, FoldMatchesTheStoresOwnSnapshot)
{
    test::TempDir dir("replay-same");
    record_run(dir.path());
    const auto store = EventStore::open(dir.path());
    EXPECT_EQ(replay(dir.path()).expected, serialize(store->read_global()));
}

TEST(Replay, MutatedSnapshotIsReported)
{
    test::TempDir dir("replay-mut");
    record_run(dir.path());
    auto snap = read_file(dir / "snapshot.json");
    const auto pos = snap.find("\"Agent\"");
    ASSERT_NE(pos, std::string::npos);
    snap.replace(pos, 7, "\"Manager\"");
    write_file(dir / "snapshot.json", snap);
    const auto r = replay(dir.path());
    EXPECT_FALSE(r.agree());
    EXPECT_TRUE(r.problems.empty());
    ASSERT_TRUE(r.first_difference);
    EXPECT_EQ(lines_of(r.expected)[*r.first_difference - 1].find("Manager"), std::string::npos);
    EXPECT_NE(r.text().find("DISAGREEMENT"), std::string::npos);
}

TEST(Replay, OneByteChangeIsReported)
{
    test::TempDir dir("replay-byte");
    record_run(dir.path());
    write_file(dir / "snapshot.json", read_file(dir / "snapshot.json") + " ");
    EXPECT_FALSE(replay(dir.path()).agree());
}

TEST(Replay, CorruptLineIsNamed)
{
    test::TempDir dir("replay-corrupt");
    record_run(dir.path());
    auto lines = lines_of(read_file(dir / "events.jsonl"));
    ASSERT_GT(lines.size(), 6u);
    lines[4] = "{\"event_id\": 5, garbage";
    write_file(dir / "events.jsonl", join(lines));
    const auto r = replay(dir.path());
    EXPECT_FALSE(r.agree());
    ASSERT_FALSE(r.problems.empty());
    EXPECT_NE(r.problems[0].find("line 5"), std::string::npos) << r.problems[0];
}

TEST(Replay, IllegalTransitionIsNamed)
{
    test::TempDir dir("replay-illegal");
    record_run(dir.path());
    auto lines = lines_of(read_file(dir / "events.jsonl"));
    std::size_t hit = 0;
    for (std::size_t i = 0; i < lines.size() && !hit; ++i)
    {
        const auto p = lines[i].find("\"to\":\"Faulty\"");
        if (p != std::string::npos)
        {
            lines[i].replace(p, 13, "\"to\":\"Recovering\"");
            hit = i + 1;
        }
    }
    ASSERT_NE(hit, 0u);
    write_file(dir / "events.jsonl", join(lines));
    const auto r = replay(dir.path());
    EXPECT_FALSE(r.agree());
    ASSERT_FALSE(r.problems.empty());
    EXPECT_NE(r.problems[0].find("line " + std::to_string(hit)), std::string::npos);
    EXPECT_NE(r.problems[0].find("illegal transition OK -> Recovering"), std::string::npos) << r.problems[0];
}

TEST(Replay, UnterminatedTailIsIgnored)
{
    test::TempDir dir("replay-tail");
    record_run(dir.path());
    write_file(dir / "events.jsonl", read_file(dir / "events.jsonl") + "{\"event_id\":999,\"ti");
    EXPECT_TRUE(replay(dir.path()).agree());
}

TEST(Replay, InitialStoreAgrees)
{
    test::TempDir dir("replay-init");
    SimConfig c;
    EventStore store(c, dir.path());
    const auto r = replay(dir.path());
    EXPECT_TRUE(r.agree()) << r.text();
    EXPECT_EQ(r.events, 0u);
}

TEST(Replay, MissingOrEmptyDirectoryIsAnError)
{
    test::TempDir dir("replay-empty");
    EXPECT_THROW(replay(dir.path()), IoError);
    EXPECT_THROW(replay(dir / "nope"), IoError);
    record_run(dir / "run");
    std::filesystem::remove(dir / "run" / "snapshot.json");
    EXPECT_THROW(replay(dir / "run"), IoError);
}
