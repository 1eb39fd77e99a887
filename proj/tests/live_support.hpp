#pragma once

#include "eftos/gateway.hpp"
#include "eftos/injector.hpp"
#include "eftos/notify.hpp"
#include "eftos/simulator.hpp"

#include <httplib.h>

#include <atomic>
#include <mutex>
#include <thread>

namespace eftos::test {

using namespace std::chrono_literals;

template <class Pred>
inline bool eventually(Pred pred, std::chrono::milliseconds limit = 5000ms)
{
    const auto deadline = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < deadline)
    {
        if (pred())
            return true;
        std::this_thread::sleep_for(5ms);
    }
    return pred();
}

inline GatewayOptions ephemeral()
{
    GatewayOptions o;
    o.http = {"127.0.0.1", 0};
    o.notify = {"127.0.0.1", 0};
    o.inject_timeout = 3000ms;
    return o;
}

/// Reads /api/stream on its own thread until `last_id` arrives or stop().
class SseClient
{
public:
    SseClient(std::uint16_t port, EventId last_id) : last_id_(last_id)
    {
        worker_ = std::thread([this, port] {
            httplib::Client cli("127.0.0.1", port);
            cli.set_read_timeout(10, 0);
            cli.Get("/api/stream", [this](const char* data, std::size_t len) {
                buffer_.append(data, len);
                for (auto end = buffer_.find("\n\n"); end != std::string::npos; end = buffer_.find("\n\n"))
                {
                    parse(buffer_.substr(0, end));
                    buffer_.erase(0, end + 2);
                }
                return !stop_ && !done_;
            });
            done_ = true;
        });
    }
    ~SseClient()
    {
        stop_ = true;
        worker_.join();
    }

    bool wait_done(std::chrono::milliseconds limit = 8000ms)
    {
        return eventually([&] { return done_.load(); }, limit);
    }
    std::vector<std::pair<EventId, nlohmann::json>> updates()
    {
        std::lock_guard lock(mutex_);
        return updates_;
    }

private:
    void parse(const std::string& block)
    {
        if (block.rfind(':', 0) == 0)
            return;
        EventId id = 0;
        std::string data;
        std::size_t pos = 0;
        while (pos < block.size())
        {
            auto nl = block.find('\n', pos);
            const auto line = block.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
            if (line.rfind("id: ", 0) == 0)
                id = std::stoull(line.substr(4));
            else if (line.rfind("data: ", 0) == 0)
                data = line.substr(6);
            pos = nl == std::string::npos ? block.size() : nl + 1;
        }
        std::lock_guard lock(mutex_);
        updates_.emplace_back(id, nlohmann::json::parse(data));
        if (id >= last_id_)
            done_ = true;
    }

    EventId last_id_;
    std::string buffer_;
    std::mutex mutex_;
    std::vector<std::pair<EventId, nlohmann::json>> updates_;
    std::atomic<bool> stop_{false};
    std::atomic<bool> done_{false};
    std::thread worker_;
};

/// Node statuses after applying every transition with id <= k, built from
/// the raw records rather than SnapshotFold.
inline std::vector<std::string> statuses_at(const std::vector<EventRecord>& log, std::size_t nodes, EventId k)
{
    std::vector<std::string> s(nodes, "OK");
    for (const auto& e : log)
        if (e.event_id <= k && e.transition)
            s[e.node.index] = std::string(to_string(e.transition->to));
    return s;
}

/// A simulator run wired to a gateway exactly the way the CLI wires it.
struct LiveRun
{
    LiveRun(const SimConfig& c, const std::filesystem::path& dir, std::uint16_t notify_port)
        : store(c, dir),
          notifier({"127.0.0.1", notify_port},
                   [this](const nlohmann::json& fault) {
                       std::lock_guard lock(inj_mutex);
                       return inj ? inject_reply(*inj, fault) : nlohmann::json{{"ok", false}, {"error", "conflict"}};
                   }),
          client(store, notifier)
    {
        client.hello(0);
        sim.emplace(c, client);
        std::lock_guard lock(inj_mutex);
        inj.emplace(*sim, store);
    }

    ~LiveRun()
    {
        std::lock_guard lock(inj_mutex);
        inj.reset();
    }

    EventStore store;
    std::mutex inj_mutex;
    std::optional<Injector> inj;
    TcpNotifier notifier;
    MonitorClient client;
    std::optional<Simulator> sim;
};

/// Drives `run` until exactly `n` events exist (faults, steps, then notices).
inline void script_until(LiveRun& run, EventId n)
{
    auto& sim = *run.sim;
    int round = 0;
    while (run.store.last_event_id() < n)
    {
        if (run.store.last_event_id() + 12 < n)
        {
            if (sim.tick() % 9 == 2)
                sim.kill_thread(ThreadId{NodeId{static_cast<std::uint32_t>(2 + round % 2)}, 0});
            if (sim.tick() % 23 == 7)
                sim.reboot_node(NodeId{3});
            sim.step();
            ++round;
        }
        else
            sim.record(EventKind::Notice, NodeId{2}, "scripted notice", "");
    }
}

} // namespace eftos::test
