#pragma once

#include "eftos/config.hpp"
#include "eftos/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eftos {

/// What an event is about. Transitions carry a status edge; the other kinds
/// carry structured effects the snapshot fold needs (roles, failure flag) or
/// are purely informational.
enum class EventKind : std::uint8_t
{
    Spawn,
    Transition,
    Injection,
    Election,
    SystemFailed,
    Relocation,
    RelocationFailed,
    Link,
    Notice,
};

std::string_view to_string(EventKind k);
EventKind parse_event_kind(std::string_view s);

struct EventRecord
{
    EventId event_id = 0;
    Tick tick = 0;
    double elapsed_seconds = 0.0;
    NodeId node;
    std::string component_id;
    EventKind kind = EventKind::Notice;
    std::optional<Transition> transition;
    std::string summary;
    std::string detail;

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// One line of events.jsonl. Field order is fixed so files are byte-stable.
std::string to_json_line(const EventRecord& e);
EventRecord event_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EventRecord& e);

struct NodeRow
{
    NodeId node;
    std::string component_id;
    ComponentRole role = ComponentRole::Agent;
    ComponentStatus status = ComponentStatus::OK;
    EventId last_event_id = 0;

    friend bool operator==(const NodeRow&, const NodeRow&) = default;
};

struct Snapshot
{
    std::vector<NodeRow> nodes;
    Tick tick = 0;
    EventId last_event_id = 0;
    bool system_failed = false;

    friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

nlohmann::json to_json(const Snapshot& s);
Snapshot snapshot_from_json(const nlohmann::json& j);

/// Canonical serialization used for snapshot.json.
std::string serialize(const Snapshot& s);

struct NodeEventPage
{
    NodeId node;
    std::vector<EventRecord> events;  // newest first
};

/// Receives every event produced by the simulator and assigns its id.
class EventSink
{
public:
    virtual ~EventSink() = default;
    virtual EventId append(EventRecord record) = 0;
};

/// Incremental fold of an event log onto the initial snapshot of a run.
/// Rejects events that break the log invariants.
class SnapshotFold
{
public:
    explicit SnapshotFold(const SimConfig& config);

    /// Throws ConsistencyError without modifying state if `e` cannot follow.
    void apply(const EventRecord& e);
    /// Same checks as apply() without mutation.
    void check(const EventRecord& e) const;

    const Snapshot& snapshot() const noexcept { return snapshot_; }

private:
    Snapshot snapshot_;
};

Snapshot initial_snapshot(const SimConfig& config);

} // namespace eftos
