#include "eftos/config.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

namespace eftos {

namespace {

template <typename T>
bool contains(const std::vector<T>& v, const T& x)
{
    return std::find(v.begin(), v.end(), x) != v.end();
}

} // namespace

void SimConfig::validate() const
{
    if (node_count == 0)
        throw ConfigError("node_count must be positive");
    if (!in_range(manager_node))
        throw ConfigError("manager_node " + to_string(manager_node) + " out of range (node_count " +
                          std::to_string(node_count) + ")");
    if (backup_nodes.empty())
        throw ConfigError("backup_nodes must be non-empty");
    std::set<NodeId> seen;
    for (auto b : backup_nodes)
    {
        if (!in_range(b))
            throw ConfigError("backup node " + to_string(b) + " out of range (node_count " +
                              std::to_string(node_count) + ")");
        if (b == manager_node)
            throw ConfigError("manager_node " + to_string(b) + " must not be a backup node");
        if (!seen.insert(b).second)
            throw ConfigError("backup node " + to_string(b) + " listed twice");
    }
    if (threads_per_node == 0)
        throw ConfigError("threads_per_node must be positive");
    if (watchdog_timeout_ticks < 1)
        throw ConfigError("watchdog_timeout_ticks must be >= 1");
    if (recovery_ticks < 1)
        throw ConfigError("recovery_ticks must be >= 1");
    if (!(seconds_per_tick > 0.0))
        throw ConfigError("seconds_per_tick must be positive");
    auto check_thread = [&](const ThreadId& t, const char* list) {
        if (!in_range(t.node) || t.local_index >= threads_per_node)
            throw ConfigError(std::string(list) + " entry " + to_string(t) + " out of range");
    };
    for (const auto& t : unwatched_threads)
        check_thread(t, "unwatched_threads");
    for (const auto& t : untrapped_threads)
        check_thread(t, "untrapped_threads");
    for (auto n : nodes_without_rtool)
        if (!in_range(n))
            throw ConfigError("nodes_without_rtool entry " + to_string(n) + " out of range");
}

ComponentRole SimConfig::initial_role(NodeId n) const noexcept
{
    if (n == manager_node)
        return ComponentRole::Manager;
    if (contains(backup_nodes, n))
        return ComponentRole::BackupAgent;
    return ComponentRole::Agent;
}

bool SimConfig::is_watched(const ThreadId& t) const noexcept
{
    return !contains(unwatched_threads, t);
}

bool SimConfig::is_trap_handled(const ThreadId& t) const noexcept
{
    return !contains(untrapped_threads, t);
}

bool SimConfig::has_rtool(NodeId n) const noexcept
{
    return !contains(nodes_without_rtool, n);
}

std::string component_id(const SimConfig& config, NodeId node)
{
    std::mt19937_64 rng(config.rng_seed ^ (0x9e3779b97f4a7c15ULL * (node.index + 1)));
    char buf[32];
    std::snprintf(buf, sizeof buf, "dir%u-%04llx", node.index,
                  static_cast<unsigned long long>(rng() & 0xffffULL));
    return buf;
}

namespace {

nlohmann::json threads_json(const std::vector<ThreadId>& ts)
{
    auto arr = nlohmann::json::array();
    for (const auto& t : ts)
        arr.push_back({t.node.index, t.local_index});
    return arr;
}

std::vector<ThreadId> threads_from(const nlohmann::json& j)
{
    std::vector<ThreadId> out;
    for (const auto& e : j)
        out.push_back(ThreadId{NodeId{e.at(0).get<std::uint32_t>()}, e.at(1).get<std::uint32_t>()});
    return out;
}

std::vector<NodeId> nodes_from(const nlohmann::json& j)
{
    std::vector<NodeId> out;
    for (const auto& e : j)
        out.emplace_back(e.get<std::uint32_t>());
    return out;
}

nlohmann::json nodes_json(const std::vector<NodeId>& ns)
{
    auto arr = nlohmann::json::array();
    for (auto n : ns)
        arr.push_back(n.index);
    return arr;
}

} // namespace

void to_json(nlohmann::json& j, const SimConfig& c)
{
    j = nlohmann::json{
        {"node_count", c.node_count},
        {"manager_node", c.manager_node.index},
        {"backup_nodes", nodes_json(c.backup_nodes)},
        {"threads_per_node", c.threads_per_node},
        {"watchdog_timeout_ticks", c.watchdog_timeout_ticks},
        {"recovery_ticks", c.recovery_ticks},
        {"rng_seed", c.rng_seed},
        {"seconds_per_tick", c.seconds_per_tick},
        {"unwatched_threads", threads_json(c.unwatched_threads)},
        {"untrapped_threads", threads_json(c.untrapped_threads)},
        {"nodes_without_rtool", nodes_json(c.nodes_without_rtool)},
    };
}

void from_json(const nlohmann::json& j, SimConfig& c)
{
    c.node_count = j.at("node_count").get<std::uint32_t>();
    c.manager_node = NodeId{j.at("manager_node").get<std::uint32_t>()};
    c.backup_nodes = nodes_from(j.at("backup_nodes"));
    c.threads_per_node = j.value("threads_per_node", 2u);
    c.watchdog_timeout_ticks = j.at("watchdog_timeout_ticks").get<Tick>();
    c.recovery_ticks = j.at("recovery_ticks").get<Tick>();
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    c.seconds_per_tick = j.value("seconds_per_tick", 1.0);
    c.unwatched_threads = threads_from(j.value("unwatched_threads", nlohmann::json::array()));
    c.untrapped_threads = threads_from(j.value("untrapped_threads", nlohmann::json::array()));
    c.nodes_without_rtool = nodes_from(j.value("nodes_without_rtool", nlohmann::json::array()));
}

} // namespace eftos
