#pragma once

#include "eftos/event.hpp"
#include "eftos/injector.hpp"
#include "eftos/net.hpp"
#include "eftos/notify.hpp"
#include "eftos/store.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace eftos {

/// OK green, Faulty and Isolated red, Recovering yellow, Killed gray.
constexpr std::string_view color_of(ComponentStatus s) noexcept
{
    switch (s)
    {
    case ComponentStatus::OK:
        return "green";
    case ComponentStatus::Faulty:
    case ComponentStatus::Isolated:
        return "red";
    case ComponentStatus::Recovering:
        return "yellow";
    case ComponentStatus::Killed:
        return "gray";
    }
    return "gray";
}

// ---------------------------------------------------------------------------
// View models
// ---------------------------------------------------------------------------

struct ViewMeta
{
    double seconds_per_tick = 1.0;
    bool run_active = false;
    int poll_interval_ms = 2000;
};

/// {"level":"Global","event_id","tick","elapsed_seconds","system_failed",
///  "run_active","poll_interval_ms","rows":[{node,component_id,role,status,
///  color,last_event_id,link}]}
nlohmann::json global_view(const Snapshot& snap, const ViewMeta& meta);
/// {"level":"Node","node","as_of_event_id","as_of_tick","events":[...newest first],"back"}
nlohmann::json node_view(const NodeEventPage& page, const Snapshot& as_of);
/// {"level":"Event","event":{record},"color","back"}
nlohmann::json event_view(const EventRecord& e);

// ---------------------------------------------------------------------------
// Update fan-out
// ---------------------------------------------------------------------------

struct Update
{
    EventId event_id = 0;
    std::string data;  // serialized Global view
};

/// Broadcasts Global views to any number of subscribers. A subscriber first
/// gets the current view, then every later broadcast, in order; subscribe and
/// broadcast share one lock, so nothing is lost or seen twice at the splice.
class UpdateHub
{
    struct Queue
    {
        std::mutex mutex;
        std::condition_variable cv;
        std::deque<Update> items;
        bool closed = false;
    };

public:
    class Subscription
    {
    public:
        Subscription() = default;
        Subscription(UpdateHub* hub, std::shared_ptr<Queue> q) : hub_(hub), queue_(std::move(q)) {}
        Subscription(Subscription&&) noexcept = default;
        Subscription& operator=(Subscription&&) noexcept = default;
        ~Subscription();

        /// Next update, or nothing after `timeout` or once the hub closed.
        std::optional<Update> next(std::chrono::milliseconds timeout);
        bool closed() const;

    private:
        UpdateHub* hub_ = nullptr;
        std::shared_ptr<Queue> queue_;
    };

    Subscription subscribe();
    /// Replaces the current view without broadcasting (new run).
    void reset(Update current);
    void broadcast(Update u);
    void close();

    std::size_t subscribers() const;
    std::uint64_t broadcasts() const;
    Update current() const;

private:
    void drop(const std::shared_ptr<Queue>& q);

    mutable std::mutex mutex_;
    Update current_;
    std::vector<std::shared_ptr<Queue>> queues_;
    std::uint64_t broadcasts_ = 0;
    bool closed_ = false;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

struct GatewayOptions
{
    net::Address http{"127.0.0.1", 8080};
    net::Address notify{"127.0.0.1", 7070};
    std::optional<std::filesystem::path> store_dir;
    std::optional<std::filesystem::path> static_dir;
    int poll_interval_ms = 2000;
    std::chrono::milliseconds inject_timeout{5000};
};

/// The intermediate module: accepts one simulator connection at a time on
/// the notification port, re-reads the store on every doorbell, and serves
/// the three-level hierarchy plus a server-sent update stream over HTTP.
class Gateway
{
public:
    static constexpr const char* kServiceName = "eftos-gateway";

    explicit Gateway(GatewayOptions options);
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Binds both ports (port 0 picks a free one). Throws IoError.
    void start();
    void stop();
    /// Blocks until stop() is called from elsewhere.
    void wait();

    std::uint16_t http_port() const noexcept { return http_port_; }
    std::uint16_t notify_port() const noexcept { return notify_port_; }

    /// Throws IoError (no store) / InvalidTarget / NotFound.
    nlohmann::json get_global();
    nlohmann::json get_node(NodeId node);
    nlohmann::json get_event(EventId id);
    nlohmann::json health() const;

    /// Validates and forwards to the connected simulator. Throws
    /// InvalidTarget, ConflictError (run ended / no simulator) or IoError.
    InjectionReceipt post_injection(const FaultSpec& spec);

    UpdateHub::Subscription subscribe() { return hub_.subscribe(); }
    UpdateHub& hub() noexcept { return hub_; }

    bool run_active() const noexcept { return run_active_; }
    bool connected() const noexcept { return connected_; }
    std::vector<std::string> protocol_errors() const;

private:
    void accept_loop();
    void serve_connection(net::Socket conn);
    void on_hello(const Notification& n);
    void on_transition(const Notification& n);
    void on_receipt(const nlohmann::json& msg);
    void protocol_error(const std::string& what);
    void open_store_locked(const std::filesystem::path& dir);
    EventStore& store_locked();
    ViewMeta meta_locked() const;
    void install_routes();

    GatewayOptions options_;
    std::unique_ptr<httplib::Server> http_;
    net::Socket listener_;
    std::uint16_t http_port_ = 0;
    std::uint16_t notify_port_ = 0;
    std::thread http_thread_;
    std::thread accept_thread_;
    std::atomic<bool> stopping_{false};
    std::atomic<bool> run_active_{false};
    std::atomic<bool> connected_{false};

    mutable std::mutex store_mutex_;
    std::unique_ptr<EventStore> store_;
    std::optional<SnapshotFold> view_fold_;  // advanced event by event for broadcasts

    UpdateHub hub_;

    mutable std::mutex conn_mutex_;
    net::Socket* conn_ = nullptr;
    std::uint64_t next_corr_ = 1;
    std::map<std::uint64_t, std::promise<nlohmann::json>> pending_;

    mutable std::mutex log_mutex_;
    std::vector<std::string> protocol_errors_;

    std::mutex wait_mutex_;
    std::condition_variable wait_cv_;
};

} // namespace eftos
