#pragma once

#include "eftos/config.hpp"
#include "eftos/event.hpp"
#include "eftos/types.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace eftos {

enum class ThreadLife : std::uint8_t
{
    Alive,
    Trapped,
    Dead,
};

std::string_view to_string(ThreadLife l);

/// Names the WatchdogTimer Dtool on a node; without a thread index the
/// lowest-index armed watchdog on that node is meant.
struct WatchdogRef
{
    NodeId node;
    std::optional<std::uint32_t> local_index;

    friend bool operator==(const WatchdogRef&, const WatchdogRef&) = default;
};

struct Component
{
    std::string id;
    NodeId node;
    ComponentRole role = ComponentRole::Agent;
    ComponentStatus status = ComponentStatus::OK;
    std::vector<ThreadId> threads;
};

struct ThreadView
{
    ThreadId id;
    ThreadLife life = ThreadLife::Alive;
    bool watched = false;       // has a WatchdogTimer
    bool trap_handled = false;  // has a TrapHandler
    bool watchdog_armed = false;
    Tick last_heartbeat = 0;
};

struct LinkStats
{
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
};

/// Application-level fault request carried out by the DIR Manager through
/// the relevant Dtool.
struct ManagerDirective
{
    enum class Action : std::uint8_t
    {
        RaiseTrap,
        KillThread,
        ForceWatchdogTimeout,
    };

    Action action = Action::KillThread;
    ThreadId thread;
    TrapKind trap = TrapKind::SegViol;
    WatchdogRef watchdog;
    std::string request_id;
};

/// Discrete-time model of a parallel application guarded by a DIR net.
///
/// Every node hosts one DIR-net component (Manager, Agent or BackupAgent) and
/// `threads_per_node` user threads. Each tick:
///   1. recoveries whose budget elapsed complete (-> OK, or -> Killed),
///   2. the DIR net moves Faulty components to Isolated and Isolated ones to
///      Recovering (Rtool present) or Killed (none),
///   3. control messages sent last tick are delivered over up links,
///   4. alive threads heartbeat their local watchdog; OK components send a
///      liveness heartbeat to the Manager,
///   5. watchdogs whose heartbeat gap reached the timeout fire,
///   6. Manager directives waiting for an OK Manager run.
/// Within a phase nodes are visited in ascending index order.
///
/// Fault operations (raise_trap, reboot_node, ...) act between ticks and are
/// stamped with the current tick. Every state change is published to the
/// EventSink exactly once.
class Simulator
{
public:
    /// spawn_system: validates `config` (ConfigError) and emits one spawn
    /// event per node at tick 0.
    Simulator(SimConfig config, EventSink& sink);

    /// Advances one tick; returns the events of that tick in log order.
    /// A failed system does not advance and returns nothing.
    std::vector<EventRecord> step();

    /// Returns the Faulty transition, or nothing when no TrapHandler watches
    /// the thread (it dies silently).
    std::vector<EventRecord> raise_trap(const ThreadId& thread, TrapKind kind);
    /// Without `to`, picks the lowest-index OK node other than the source.
    std::vector<EventRecord> relocate_thread(const ThreadId& thread, std::optional<NodeId> to = std::nullopt);
    /// Requires the Manager to be Faulty, Isolated or Killed. Returns the new
    /// Manager's node, or nothing after emitting the system-failed event.
    std::optional<NodeId> elect_manager();
    std::vector<EventRecord> set_link(NodeId a, NodeId b, bool up);
    std::vector<EventRecord> reboot_node(NodeId node);
    std::vector<EventRecord> kill_thread(const ThreadId& thread);
    std::vector<EventRecord> force_watchdog_timeout(const WatchdogRef& ref);

    /// Runs the directive now if the Manager is OK, else keeps it queued.
    /// Returns true if it ran.
    bool submit_directive(ManagerDirective d);
    std::size_t pending_directives() const noexcept { return directives_.size(); }

    /// Appends an informational event (injection markers and the like).
    EventRecord record(EventKind kind, NodeId node, std::string summary, std::string detail);

    Tick tick() const noexcept { return tick_; }
    bool failed() const noexcept { return failed_; }
    NodeId manager() const noexcept { return manager_; }
    const SimConfig& config() const noexcept { return config_; }
    Component component(NodeId node) const;
    std::vector<Component> components() const;
    std::optional<ThreadView> thread(const ThreadId& id) const;
    bool link_up(NodeId a, NodeId b) const;
    LinkStats link_stats(NodeId from, NodeId to) const;
    /// Resolves a WatchdogRef to the thread whose armed watchdog it names.
    std::optional<ThreadId> resolve_watchdog(const WatchdogRef& ref) const;

private:
    enum class CauseKind : std::uint8_t
    {
        WatchdogExpired,
        ForcedTimeout,
        Trap,
        HeartbeatLoss,
        Reboot,
    };

    struct Cause
    {
        CauseKind kind = CauseKind::WatchdogExpired;
        std::optional<ThreadId> thread;
        TrapKind trap = TrapKind::SegViol;
        Tick gap = 0;
    };

    struct ThreadState
    {
        ThreadId id;
        ThreadLife life = ThreadLife::Alive;
        bool watched = true;
        bool trap_handled = true;
        Tick last_heartbeat = 0;
        bool watchdog_suspended = false;  // thread under restart by an Rtool
        bool watchdog_latched = false;    // already fired for this outage
    };

    struct ComponentState
    {
        std::string id;
        NodeId node;
        ComponentRole role = ComponentRole::Agent;
        ComponentStatus status = ComponentStatus::OK;
        std::vector<ThreadId> threads;
        Tick status_since = 0;
        Tick recovery_end = 0;
        std::vector<Cause> causes;
        std::vector<Cause> queued;
        std::vector<ThreadId> restarting;
        bool relocation_failed = false;
        Tick liveness_last = 0;
    };

    struct Message
    {
        NodeId from;
        std::optional<NodeId> to;  // empty: whoever is Manager at delivery
        Tick sent = 0;
    };

    using LinkKey = std::pair<std::uint32_t, std::uint32_t>;
    static LinkKey link_key(NodeId a, NodeId b);

    ComponentState& comp(NodeId n) { return components_[n.index]; }
    const ComponentState& comp(NodeId n) const { return components_[n.index]; }
    ThreadState& thread_state(const ThreadId& t);
    ComponentState& host_of(const ThreadId& t);

    EventRecord emit(EventKind kind, NodeId node, std::optional<Transition> tr, std::string summary,
                     std::string detail);
    void transition(ComponentState& c, ComponentStatus to, std::string summary, std::string detail);

    void detect(ComponentState& c, Cause cause);
    void begin_isolated_exit(ComponentState& c);
    void complete_recovery(ComponentState& c);
    bool relocate_default(const ThreadId& thread);
    void do_relocate(const ThreadId& thread, NodeId to);
    void run_election();
    void run_directives();
    void execute_directive(const ManagerDirective& d);
    void send_heartbeats();
    void deliver_messages();
    void check_watchdogs();
    void check_liveness();

    std::string describe(const Cause& cause) const;
    bool watchdog_armed(const ThreadState& t) const;

    SimConfig config_;
    EventSink* sink_;
    Tick tick_ = 0;
    bool failed_ = false;
    NodeId manager_;
    std::vector<ComponentState> components_;
    std::map<ThreadId, ThreadState> threads_;
    std::vector<std::uint32_t> next_local_index_;
    std::set<LinkKey> down_links_;
    std::map<LinkKey, LinkStats> link_stats_;  // keyed (from, to), directed
    std::vector<Message> in_flight_;
    std::vector<ManagerDirective> directives_;
    std::vector<EventRecord> collected_;
};

/// Free-function spelling of the spawn operation.
inline Simulator spawn_system(SimConfig config, EventSink& sink)
{
    return Simulator(std::move(config), sink);
}

} // namespace eftos
