#include "eftos/event.hpp"

namespace eftos {

namespace {

constexpr std::pair<EventKind, std::string_view> kKindNames[] = {
    {EventKind::Spawn, "spawn"},
    {EventKind::Transition, "transition"},
    {EventKind::Injection, "injection"},
    {EventKind::Election, "election"},
    {EventKind::SystemFailed, "system_failed"},
    {EventKind::Relocation, "relocation"},
    {EventKind::RelocationFailed, "relocation_failed"},
    {EventKind::Link, "link"},
    {EventKind::Notice, "notice"},
};

nlohmann::ordered_json ordered(const EventRecord& e)
{
    nlohmann::ordered_json j;
    j["event_id"] = e.event_id;
    j["tick"] = e.tick;
    j["elapsed_seconds"] = e.elapsed_seconds;
    j["node"] = e.node.index;
    j["component_id"] = e.component_id;
    j["kind"] = to_string(e.kind);
    if (e.transition)
    {
        j["from"] = to_string(e.transition->from);
        j["to"] = to_string(e.transition->to);
    }
    else
    {
        j["from"] = nullptr;
        j["to"] = nullptr;
    }
    j["summary"] = e.summary;
    j["detail"] = e.detail;
    return j;
}

} // namespace

std::string_view to_string(EventKind k)
{
    for (const auto& [kind, name] : kKindNames)
        if (kind == k)
            return name;
    return "notice";
}

EventKind parse_event_kind(std::string_view s)
{
    for (const auto& [kind, name] : kKindNames)
        if (name == s)
            return kind;
    throw ConsistencyError("unknown event kind '" + std::string(s) + "'");
}

std::string to_json_line(const EventRecord& e)
{
    return ordered(e).dump();
}

nlohmann::json to_json(const EventRecord& e)
{
    return nlohmann::json(ordered(e));
}

EventRecord event_from_json(const nlohmann::json& j)
{
    EventRecord e;
    e.event_id = j.at("event_id").get<EventId>();
    e.tick = j.at("tick").get<Tick>();
    e.elapsed_seconds = j.at("elapsed_seconds").get<double>();
    e.node = NodeId{j.at("node").get<std::uint32_t>()};
    e.component_id = j.at("component_id").get<std::string>();
    e.kind = parse_event_kind(j.at("kind").get<std::string>());
    const auto& from = j.at("from");
    const auto& to = j.at("to");
    if (from.is_null() != to.is_null())
        throw ConsistencyError("event " + std::to_string(e.event_id) + ": from/to must both be present");
    if (!from.is_null())
        e.transition = Transition{parse_status(from.get<std::string>()), parse_status(to.get<std::string>())};
    e.summary = j.at("summary").get<std::string>();
    e.detail = j.at("detail").get<std::string>();
    return e;
}

static nlohmann::ordered_json ordered_snapshot(const Snapshot& s)
{
    nlohmann::ordered_json j;
    j["tick"] = s.tick;
    j["last_event_id"] = s.last_event_id;
    j["system_failed"] = s.system_failed;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : s.nodes)
    {
        nlohmann::ordered_json row;
        row["node"] = r.node.index;
        row["component_id"] = r.component_id;
        row["role"] = to_string(r.role);
        row["status"] = to_string(r.status);
        row["last_event_id"] = r.last_event_id;
        rows.push_back(std::move(row));
    }
    j["nodes"] = std::move(rows);
    return j;
}

nlohmann::json to_json(const Snapshot& s)
{
    return nlohmann::json(ordered_snapshot(s));
}

std::string serialize(const Snapshot& s)
{
    return ordered_snapshot(s).dump(2) + "\n";
}

Snapshot snapshot_from_json(const nlohmann::json& j)
{
    Snapshot s;
    s.tick = j.at("tick").get<Tick>();
    s.last_event_id = j.at("last_event_id").get<EventId>();
    s.system_failed = j.at("system_failed").get<bool>();
    for (const auto& row : j.at("nodes"))
    {
        NodeRow r;
        r.node = NodeId{row.at("node").get<std::uint32_t>()};
        r.component_id = row.at("component_id").get<std::string>();
        r.role = parse_role(row.at("role").get<std::string>());
        r.status = parse_status(row.at("status").get<std::string>());
        r.last_event_id = row.at("last_event_id").get<EventId>();
        s.nodes.push_back(std::move(r));
    }
    return s;
}

Snapshot initial_snapshot(const SimConfig& config)
{
    Snapshot s;
    for (std::uint32_t i = 0; i < config.node_count; ++i)
    {
        NodeId n{i};
        s.nodes.push_back(NodeRow{n, component_id(config, n), config.initial_role(n), ComponentStatus::OK, 0});
    }
    return s;
}

SnapshotFold::SnapshotFold(const SimConfig& config) : snapshot_(initial_snapshot(config)) {}

void SnapshotFold::check(const EventRecord& e) const
{
    const auto id = std::to_string(e.event_id);
    if (e.event_id <= snapshot_.last_event_id)
        throw ConsistencyError("event " + id + ": id does not increase (last " +
                               std::to_string(snapshot_.last_event_id) + ")");
    if (e.tick < snapshot_.tick)
        throw ConsistencyError("event " + id + ": tick " + std::to_string(e.tick) + " precedes tick " +
                               std::to_string(snapshot_.tick));
    if (e.node.index >= snapshot_.nodes.size())
        throw ConsistencyError("event " + id + ": node " + to_string(e.node) + " out of range");
    if (e.summary.empty())
        throw ConsistencyError("event " + id + ": empty summary");
    const auto& row = snapshot_.nodes[e.node.index];
    if (e.kind == EventKind::Transition)
    {
        if (!e.transition)
            throw ConsistencyError("event " + id + ": transition event without from/to");
        if (e.transition->from != row.status)
            throw ConsistencyError("event " + id + ": node " + to_string(e.node) + " is " +
                                   std::string(to_string(row.status)) + ", not " +
                                   std::string(to_string(e.transition->from)));
        if (!is_legal_transition(e.transition->from, e.transition->to))
            throw ConsistencyError("event " + id + ": illegal transition " +
                                   std::string(to_string(e.transition->from)) + " -> " +
                                   std::string(to_string(e.transition->to)));
    }
    else if (e.transition)
    {
        throw ConsistencyError("event " + id + ": only transition events carry from/to");
    }
    if (e.kind == EventKind::Election && row.role != ComponentRole::BackupAgent)
        throw ConsistencyError("event " + id + ": node " + to_string(e.node) + " elected but is " +
                               std::string(to_string(row.role)));
}

void SnapshotFold::apply(const EventRecord& e)
{
    check(e);
    auto& row = snapshot_.nodes[e.node.index];
    if (e.transition)
        row.status = e.transition->to;
    if (e.kind == EventKind::Election)
    {
        for (auto& other : snapshot_.nodes)
            if (other.role == ComponentRole::Manager)
                other.role = ComponentRole::Agent;
        row.role = ComponentRole::Manager;
    }
    if (e.kind == EventKind::SystemFailed)
        snapshot_.system_failed = true;
    row.last_event_id = e.event_id;
    snapshot_.last_event_id = e.event_id;
    snapshot_.tick = e.tick;
}

} // namespace eftos
