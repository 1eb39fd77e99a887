#pragma once

#include "eftos/event.hpp"
#include "eftos/types.hpp"

#include <atomic>
#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

namespace eftos::test {

/// Scratch directory removed on scope exit.
class TempDir
{
public:
    explicit TempDir(const std::string& tag)
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("eftos-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

struct Seen
{
    Tick tick;
    std::uint32_t node;
    ComponentStatus from;
    ComponentStatus to;

    friend bool operator==(const Seen&, const Seen&) = default;
};

inline std::vector<Seen> transitions_of(const std::vector<EventRecord>& log)
{
    std::vector<Seen> out;
    for (const auto& e : log)
        if (e.transition)
            out.push_back(Seen{e.tick, e.node.index, e.transition->from, e.transition->to});
    return out;
}

inline std::string show(const std::vector<Seen>& v)
{
    std::string s;
    for (const auto& x : v)
        s += "t" + std::to_string(x.tick) + " n" + std::to_string(x.node) + " " + std::string(to_string(x.from)) +
             "->" + std::string(to_string(x.to)) + "\n";
    return s;
}

// ---------------------------------------------------------------------------
// Tick oracle
//
// A second, deliberately separate model of the tick rules, kept to what the
// latency checks need: one DIR-net component per node, a heartbeat gap per
// dead thread, a liveness gap per node, and the detect/isolate/recover ladder.
// Faults are applied at the end of their tick, as the injector does.
// ---------------------------------------------------------------------------

namespace oracle {

enum class Fault
{
    KillThread,
    Trap,
    ForcedTimeout,
    LinkToManager,
    Reboot,
};

struct Injection
{
    Fault fault;
    std::uint32_t node;
    Tick at;
};

struct Result
{
    std::vector<Seen> transitions;
    std::vector<std::pair<Tick, std::uint32_t>> elections;  // (tick, new manager)
};

inline Result run(std::uint32_t nodes, std::uint32_t manager, std::vector<std::uint32_t> backups, Tick T, Tick R,
                  const std::vector<Injection>& faults, Tick until)
{
    using S = ComponentStatus;
    struct N
    {
        S status = S::OK;
        Tick since = 0;
        Tick rec_end = 0;
        bool dead_thread = false;
        Tick hb_last = 0;
        bool latched = false;
        bool cut = false;
        Tick live_last = 0;
        bool sending = true;
        bool link_cause = false;
        bool backup = false;
    };
    std::vector<N> n(nodes);
    for (auto b : backups)
        n[b].backup = true;
    Result out;
    auto move = [&](std::uint32_t i, S to, Tick t) {
        out.transitions.push_back(Seen{t, i, n[i].status, to});
        n[i].status = to;
        n[i].since = t;
    };
    auto faulty = [&](std::uint32_t i, Tick t) {
        move(i, S::Faulty, t);
        if (i != manager)
            return;
        for (std::uint32_t k = 0; k < nodes; ++k)
            if (n[k].backup && n[k].status == S::OK)
            {
                n[k].backup = false;
                manager = k;
                out.elections.emplace_back(t, k);
                for (auto& x : n)
                    x.live_last = t;
                return;
            }
    };
    auto apply = [&](const Injection& f, Tick t) {
        auto& x = n[f.node];
        switch (f.fault)
        {
        case Fault::KillThread:
            x.dead_thread = true;
            x.hb_last = t;
            x.latched = false;
            break;
        case Fault::Trap:
        case Fault::ForcedTimeout:
            if (x.status == S::OK)
                faulty(f.node, t);
            break;
        case Fault::LinkToManager:
            x.cut = true;
            break;
        case Fault::Reboot:
            if (x.status == S::OK)
            {
                faulty(f.node, t);
                move(f.node, S::Isolated, t);
                move(f.node, S::Recovering, t);
                x.rec_end = t + R;
                x.dead_thread = false;
            }
            break;
        }
    };

    for (const auto& f : faults)
        if (f.at == 0)
            apply(f, 0);
    for (Tick t = 1; t <= until; ++t)
    {
        for (std::uint32_t i = 0; i < nodes; ++i)
        {
            auto& x = n[i];
            if (x.status != S::Recovering || x.rec_end != t)
                continue;
            if (x.link_cause && x.cut)
            {
                move(i, S::Killed, t);
            }
            else
            {
                move(i, S::OK, t);
                x.dead_thread = false;
                x.latched = false;
                x.live_last = t;
            }
            x.link_cause = false;
        }
        for (std::uint32_t i = 0; i < nodes; ++i)
        {
            auto& x = n[i];
            if (x.since >= t)
                continue;
            if (x.status == S::Isolated)
            {
                move(i, S::Recovering, t);
                x.rec_end = t + R;
            }
            else if (x.status == S::Faulty)
            {
                move(i, S::Isolated, t);
            }
        }
        // liveness messages sent last tick arrive now
        for (std::uint32_t i = 0; i < nodes; ++i)
            if (i != manager && n[i].sending && !n[i].cut)
                n[i].live_last = t;
        for (auto& x : n)
            x.sending = x.status == S::OK;
        for (std::uint32_t i = 0; i < nodes; ++i)
        {
            auto& x = n[i];
            if (!x.dead_thread || x.latched || x.status == S::Killed || t - x.hb_last < T)
                continue;
            x.latched = true;
            if (x.status == S::OK)
                faulty(i, t);
        }
        if (n[manager].status == S::OK)
            for (std::uint32_t i = 0; i < nodes; ++i)
            {
                auto& x = n[i];
                if (i == manager || x.status != S::OK || t - x.live_last < T)
                    continue;
                x.live_last = t;
                x.link_cause = true;
                faulty(i, t);
            }
        for (const auto& f : faults)
            if (f.at == t)
                apply(f, t);
    }
    return out;
}

} // namespace oracle

} // namespace eftos::test
