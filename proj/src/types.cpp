#include "eftos/types.hpp"

namespace eftos {

std::string to_string(NodeId n)
{
    return std::to_string(n.index);
}

std::string to_string(const ThreadId& t)
{
    return "(" + std::to_string(t.node.index) + "," + std::to_string(t.local_index) + ")";
}

std::string_view to_string(ComponentRole r)
{
    switch (r)
    {
    case ComponentRole::Manager:
        return "Manager";
    case ComponentRole::Agent:
        return "Agent";
    case ComponentRole::BackupAgent:
        return "BackupAgent";
    }
    return "?";
}

std::string_view to_string(ComponentStatus s)
{
    switch (s)
    {
    case ComponentStatus::OK:
        return "OK";
    case ComponentStatus::Faulty:
        return "Faulty";
    case ComponentStatus::Isolated:
        return "Isolated";
    case ComponentStatus::Recovering:
        return "Recovering";
    case ComponentStatus::Killed:
        return "Killed";
    }
    return "?";
}

ComponentRole parse_role(std::string_view s)
{
    if (s == "Manager")
        return ComponentRole::Manager;
    if (s == "Agent")
        return ComponentRole::Agent;
    if (s == "BackupAgent")
        return ComponentRole::BackupAgent;
    throw ConsistencyError("unknown role '" + std::string(s) + "'");
}

ComponentStatus parse_status(std::string_view s)
{
    for (auto st : kAllStatuses)
        if (to_string(st) == s)
            return st;
    throw ConsistencyError("unknown status '" + std::string(s) + "'");
}

std::string_view to_string(TrapKind k)
{
    return k == TrapKind::DivZero ? "divzero" : "segv";
}

} // namespace eftos
