#pragma once

#include "eftos/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace eftos {

/// Static description of a simulated run. Detection and recovery coverage is
/// full by default; the three coverage lists carve holes into it.
struct SimConfig
{
    std::uint32_t node_count = 4;
    NodeId manager_node{0};
    std::vector<NodeId> backup_nodes{NodeId{1}};
    std::uint32_t threads_per_node = 2;
    Tick watchdog_timeout_ticks = 3;
    Tick recovery_ticks = 2;
    std::uint64_t rng_seed = 1;
    double seconds_per_tick = 1.0;

    std::vector<ThreadId> unwatched_threads;  // no WatchdogTimer
    std::vector<ThreadId> untrapped_threads;  // no TrapHandler
    std::vector<NodeId> nodes_without_rtool;  // Isolated -> Killed on these

    /// Throws ConfigError naming the first violated invariant.
    void validate() const;

    bool in_range(NodeId n) const noexcept { return n.index < node_count; }
    ComponentRole initial_role(NodeId n) const noexcept;
    bool is_watched(const ThreadId& t) const noexcept;
    bool is_trap_handled(const ThreadId& t) const noexcept;
    bool has_rtool(NodeId n) const noexcept;

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// Opaque, seed-derived identifier of the DIR-net component hosted on `node`.
std::string component_id(const SimConfig& config, NodeId node);

void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);

} // namespace eftos
