#pragma once

#include "eftos/simulator.hpp"
#include "eftos/store.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace eftos {

enum class FaultKind : std::uint8_t
{
    DivZero,
    SegViol,
    LinkFailure,
    NodeReboot,
    ThreadKill,
    WatchdogTimeout,
};

inline constexpr FaultKind kAllFaultKinds[] = {
    FaultKind::DivZero,    FaultKind::SegViol,   FaultKind::LinkFailure,
    FaultKind::NodeReboot, FaultKind::ThreadKill, FaultKind::WatchdogTimeout,
};

/// Wire name, e.g. "kill-thread", "trap-segv".
std::string_view to_string(FaultKind k);
FaultKind parse_fault_kind(std::string_view s);

enum class RoutingClass : std::uint8_t
{
    SystemLevel,
    ApplicationLevel,
};

std::string_view to_string(RoutingClass r);

struct LinkTarget
{
    NodeId a;
    NodeId b;

    friend bool operator==(const LinkTarget&, const LinkTarget&) = default;
};

using FaultTarget = std::variant<ThreadId, LinkTarget, NodeId, WatchdogRef>;

struct FaultSpec
{
    FaultKind kind = FaultKind::ThreadKill;
    FaultTarget target;
    std::optional<Tick> at_tick;  // default: next tick
    std::string request_id;

    friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

/// System-level faults act on the substrate directly; application-level ones
/// are carried out by the DIR Manager through a Dtool.
constexpr RoutingClass classify(FaultKind k) noexcept
{
    switch (k)
    {
    case FaultKind::NodeReboot:
    case FaultKind::LinkFailure:
        return RoutingClass::SystemLevel;
    case FaultKind::DivZero:
    case FaultKind::SegViol:
    case FaultKind::ThreadKill:
    case FaultKind::WatchdogTimeout:
        return RoutingClass::ApplicationLevel;
    }
    return RoutingClass::ApplicationLevel;
}

constexpr RoutingClass classify(const FaultSpec& spec) noexcept
{
    return classify(spec.kind);
}

/// Target arity and ranges against `config`. Throws InvalidTarget.
void validate(const FaultSpec& spec, const SimConfig& config);

/// Nodes whose events are attributed to this fault.
std::vector<NodeId> target_nodes(const FaultSpec& spec);

std::string describe(const FaultSpec& spec);

/// {"kind": "...", "target": [..], "at_tick": n|null, "request_id": "..."}
nlohmann::json to_json(const FaultSpec& spec);
FaultSpec fault_from_json(const nlohmann::json& j);

struct InjectionReceipt
{
    std::string request_id;
    RoutingClass routing = RoutingClass::SystemLevel;
    Tick scheduled_tick = 0;
    bool queued = false;  // waiting for an OK Manager
    std::optional<EventId> marker_event_id;
    std::optional<Tick> marker_tick;
    std::vector<EventId> resulting_event_ids;
    FaultSpec spec;
};

nlohmann::json to_json(const InjectionReceipt& r);
InjectionReceipt receipt_from_json(const nlohmann::json& j);

struct FeedbackReport
{
    FaultSpec injection;
    bool detected = false;
    std::optional<Tick> detection_latency_ticks;
    std::optional<Tick> isolation_latency_ticks;
    std::optional<Tick> recovery_latency_ticks;
    ComponentStatus final_status = ComponentStatus::OK;
    bool resolved = false;  // terminal outcome seen or window elapsed
};

nlohmann::json to_json(const FeedbackReport& r);

/// Scans the log after the receipt's marker. `current_tick` decides whether
/// the observation window has elapsed. Fills receipt.resulting_event_ids.
FeedbackReport observe(InjectionReceipt& receipt, const EventStore& store, Tick current_tick, Tick window);

struct InjectorOptions
{
    Tick observation_window = 50;
    /// Called before every step; pacing and external injections hook in here.
    std::function<void()> before_step;
};

/// Validates, schedules and carries out FaultSpecs against one simulator.
/// inject() may be called from any thread; everything that touches the
/// simulator happens inside advance() / execute_due() on the driver thread.
class Injector
{
public:
    Injector(Simulator& sim, const EventStore& store, InjectorOptions options = {});

    /// Throws InvalidTarget (bad target, tick in the past, overlapping
    /// injection on the same target) or ConflictError (duplicate request id).
    InjectionReceipt inject(FaultSpec spec);

    /// Runs injections scheduled for the current tick.
    void execute_due();
    /// step() followed by execute_due(); returns the events of both.
    std::vector<EventRecord> advance();

    std::optional<InjectionReceipt> receipt(const std::string& request_id) const;
    FeedbackReport observe(const std::string& request_id);

    /// The current tick as seen by injecting threads.
    Tick current_tick() const;
    Tick window() const noexcept { return options_.observation_window; }
    Simulator& simulator() noexcept { return sim_; }
    const EventStore& store() const noexcept { return store_; }

private:
    void execute(InjectionReceipt& r);

    Simulator& sim_;
    const EventStore& store_;
    InjectorOptions options_;
    mutable std::mutex mutex_;
    Tick published_tick_ = 0;
    std::uint64_t next_auto_id_ = 1;
    std::map<std::string, InjectionReceipt> receipts_;
    std::vector<std::string> pending_;  // request ids, in submission order
};

/// Answers a remote injection request with {"ok":true,"receipt":{...}} or
/// {"ok":false,"error":"invalid_target"|"conflict","message":...}.
nlohmann::json inject_reply(Injector& injector, const nlohmann::json& fault);

// ---------------------------------------------------------------------------
// The inject -> observe -> conclude loop
// ---------------------------------------------------------------------------

struct Expectation
{
    std::string name;
    std::function<bool(const FeedbackReport&)> holds;

    static Expectation any();
    static Expectation detected();
    static Expectation undetected();
    static Expectation recovered();
    static Expectation killed();
    /// By name: any, detected, undetected, recovered, killed.
    static Expectation named(std::string_view name);
};

struct ScenarioEntry
{
    FaultSpec spec;
    Expectation expect = Expectation::detected();
    std::size_t line = 0;
};

struct LoopIteration
{
    std::size_t index = 0;
    FaultSpec spec;
    std::optional<InjectionReceipt> receipt;
    std::optional<FeedbackReport> report;
    std::string expectation;
    bool passed = false;
    std::string note;
};

struct LoopReport
{
    std::vector<LoopIteration> iterations;
    bool aborted = false;
    bool system_failed = false;
    Tick final_tick = 0;

    bool all_passed() const;
    nlohmann::json to_json() const;
    /// Human-readable verdict table.
    std::string table() const;
};

/// For each entry: inject, step until the feedback resolves, observe, and
/// evaluate the expectation. Aborts with a partial report once the system
/// has failed. Throws PreconditionError on an empty scenario.
LoopReport run_loop(const std::vector<ScenarioEntry>& scenario, Injector& injector);

/// Scenario file: one `at <tick> <fault-kind> <target...> [expect <name>]`
/// per line; blank lines and `#` comments are ignored. Throws ParseError.
std::vector<ScenarioEntry> parse_scenario(std::string_view text);
std::vector<ScenarioEntry> load_scenario(const std::string& path);

} // namespace eftos
