#include "eftos/replay.hpp"

#include "eftos/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace eftos {

namespace {

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Kept apart from the store's transition table on purpose.
const std::set<std::pair<std::string, std::string>> kEdges = {
    {"OK", "Faulty"},          {"Faulty", "Isolated"},     {"Isolated", "Recovering"},
    {"Isolated", "Killed"},    {"Recovering", "OK"},       {"Recovering", "Killed"},
};

struct Row
{
    std::uint64_t node = 0;
    std::string component_id;
    std::string role;
    std::string status = "OK";
    std::uint64_t last_event_id = 0;
};

struct State
{
    std::uint64_t tick = 0;
    std::uint64_t last_event_id = 0;
    bool system_failed = false;
    std::vector<Row> rows;

    std::string serialize() const
    {
        nlohmann::ordered_json j;
        j["tick"] = tick;
        j["last_event_id"] = last_event_id;
        j["system_failed"] = system_failed;
        auto arr = nlohmann::ordered_json::array();
        for (const auto& r : rows)
        {
            nlohmann::ordered_json o;
            o["node"] = r.node;
            o["component_id"] = r.component_id;
            o["role"] = r.role;
            o["status"] = r.status;
            o["last_event_id"] = r.last_event_id;
            arr.push_back(std::move(o));
        }
        j["nodes"] = std::move(arr);
        return j.dump(2) + "\n";
    }
};

/// Returns a problem description, or empty if the line folded cleanly.
std::string fold_line(State& s, const std::string& line)
{
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(line);
    }
    catch (const nlohmann::json::exception&)
    {
        return "corrupt entry (not JSON)";
    }
    for (const char* key : {"event_id", "tick", "node", "kind", "from", "to", "summary"})
        if (!j.is_object() || !j.contains(key))
            return std::string("corrupt entry (missing ") + key + ")";
    if (!j["event_id"].is_number_unsigned() || !j["tick"].is_number_unsigned() || !j["node"].is_number_unsigned() ||
        !j["kind"].is_string())
        return "corrupt entry (bad field type)";
    const auto id = j["event_id"].get<std::uint64_t>();
    const auto tick = j["tick"].get<std::uint64_t>();
    const auto node = j["node"].get<std::uint64_t>();
    const auto kind = j["kind"].get<std::string>();
    if (id <= s.last_event_id)
        return "event id " + std::to_string(id) + " does not increase";
    if (tick < s.tick)
        return "tick " + std::to_string(tick) + " goes backwards";
    if (node >= s.rows.size())
        return "node " + std::to_string(node) + " out of range";
    auto& row = s.rows[node];
    const bool has_edge = !j["from"].is_null() || !j["to"].is_null();
    if (kind == "transition")
    {
        if (!j["from"].is_string() || !j["to"].is_string())
            return "transition without from/to";
        const auto from = j["from"].get<std::string>();
        const auto to = j["to"].get<std::string>();
        if (from != row.status)
            return "transition from " + from + " but node " + std::to_string(node) + " is " + row.status;
        if (!kEdges.count({from, to}))
            return "illegal transition " + from + " -> " + to;
        row.status = to;
    }
    else if (has_edge)
    {
        return "non-transition entry carries from/to";
    }
    if (kind == "election")
    {
        if (row.role != "BackupAgent")
            return "node " + std::to_string(node) + " elected while " + row.role;
        for (auto& r : s.rows)
            if (r.role == "Manager")
                r.role = "Agent";
        row.role = "Manager";
    }
    if (kind == "system_failed")
        s.system_failed = true;
    row.last_event_id = id;
    s.last_event_id = id;
    s.tick = tick;
    return {};
}

std::optional<std::size_t> first_differing_line(const std::string& a, const std::string& b)
{
    if (a == b)
        return std::nullopt;
    std::istringstream x(a), y(b);
    std::string la, lb;
    for (std::size_t n = 1;; ++n)
    {
        const bool ga = static_cast<bool>(std::getline(x, la));
        const bool gb = static_cast<bool>(std::getline(y, lb));
        if (!ga && !gb)
            return n;  // differ only in the final newline
        if (ga != gb || la != lb)
            return n;
    }
}

} // namespace

ReplayReport replay(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir))
        throw IoError(dir.string() + " is not a directory");
    if (std::filesystem::is_empty(dir))
        throw IoError(dir.string() + " is empty, not a completed run");
    const auto config_path = dir / "config.json";
    if (!std::filesystem::exists(config_path))
        throw IoError(dir.string() + " has no config.json");
    SimConfig config;
    try
    {
        config = nlohmann::json::parse(slurp(config_path)).get<SimConfig>();
    }
    catch (const nlohmann::json::exception& e)
    {
        throw IoError("config.json is unreadable: " + std::string(e.what()));
    }

    ReplayReport report;
    report.directory = dir;
    State s;
    for (std::uint32_t i = 0; i < config.node_count; ++i)
    {
        const NodeId n{i};
        s.rows.push_back(Row{i, component_id(config, n), std::string(to_string(config.initial_role(n))), "OK", 0});
    }

    const auto log_path = dir / "events.jsonl";
    const std::string log = std::filesystem::exists(log_path) ? slurp(log_path) : std::string();
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < log.size())
    {
        const auto nl = log.find('\n', pos);
        if (nl == std::string::npos)
            break;  // an unterminated tail is an append that never completed
        ++line_no;
        const auto line = log.substr(pos, nl - pos);
        pos = nl + 1;
        if (const auto problem = fold_line(s, line); !problem.empty())
            report.problems.push_back("events.jsonl line " + std::to_string(line_no) + ": " + problem);
        else
            ++report.events;
    }

    const auto snap_path = dir / "snapshot.json";
    if (!std::filesystem::exists(snap_path))
        throw IoError(dir.string() + " has no snapshot.json");
    report.actual = slurp(snap_path);
    report.expected = s.serialize();
    report.first_difference = first_differing_line(report.expected, report.actual);
    return report;
}

std::string ReplayReport::text() const
{
    std::ostringstream out;
    out << "replay " << directory.string() << ": " << events << " events folded\n";
    for (const auto& p : problems)
        out << "  " << p << "\n";
    if (bytes_agree())
        out << "snapshot.json matches the fold byte for byte\n";
    else
        out << "snapshot.json differs from the fold at line " << first_difference.value_or(0) << "\n";
    out << (agree() ? "agreement" : "DISAGREEMENT") << "\n";
    return out.str();
}

} // namespace eftos
