#include "eftos/simulator.hpp"

#include <algorithm>
#include <sstream>

namespace eftos {

namespace {

std::string trap_name(TrapKind k)
{
    return k == TrapKind::DivZero ? "integer division by zero (SIGFPE)" : "segmentation violation (SIGSEGV)";
}

std::string role_name(ComponentRole r)
{
    switch (r)
    {
    case ComponentRole::Manager:
        return "DIR Manager";
    case ComponentRole::Agent:
        return "DIR Agent";
    case ComponentRole::BackupAgent:
        return "DIR Backup Agent";
    }
    return "DIR component";
}

} // namespace

std::string_view to_string(ThreadLife l)
{
    switch (l)
    {
    case ThreadLife::Alive:
        return "alive";
    case ThreadLife::Trapped:
        return "trapped";
    case ThreadLife::Dead:
        return "dead";
    }
    return "?";
}

Simulator::Simulator(SimConfig config, EventSink& sink) : config_(std::move(config)), sink_(&sink)
{
    config_.validate();
    manager_ = config_.manager_node;
    next_local_index_.assign(config_.node_count, config_.threads_per_node);
    components_.reserve(config_.node_count);
    for (std::uint32_t i = 0; i < config_.node_count; ++i)
    {
        NodeId n{i};
        ComponentState c;
        c.id = component_id(config_, n);
        c.node = n;
        c.role = config_.initial_role(n);
        for (std::uint32_t k = 0; k < config_.threads_per_node; ++k)
        {
            ThreadId t{n, k};
            c.threads.push_back(t);
            ThreadState ts;
            ts.id = t;
            ts.watched = config_.is_watched(t);
            ts.trap_handled = config_.is_trap_handled(t);
            threads_.emplace(t, ts);
        }
        components_.push_back(std::move(c));
    }
    for (const auto& c : components_)
    {
        std::ostringstream detail;
        detail << role_name(c.role) << " " << c.id << " started on node " << c.node.index << ".\n"
               << "Threads: " << c.threads.size() << ", watchdog timeout " << config_.watchdog_timeout_ticks
               << " ticks, recovery budget " << config_.recovery_ticks << " ticks.";
        emit(EventKind::Spawn, c.node, std::nullopt, std::string(to_string(c.role)) + " started", detail.str());
    }
    collected_.clear();
    // Tick 0 heartbeats so the first delivery round is not empty.
    send_heartbeats();
}

Simulator::LinkKey Simulator::link_key(NodeId a, NodeId b)
{
    return a.index < b.index ? LinkKey{a.index, b.index} : LinkKey{b.index, a.index};
}

Simulator::ThreadState& Simulator::thread_state(const ThreadId& t)
{
    auto it = threads_.find(t);
    if (it == threads_.end())
        throw InvalidTarget("unknown thread " + to_string(t));
    return it->second;
}

Simulator::ComponentState& Simulator::host_of(const ThreadId& t)
{
    return comp(t.node);
}

EventRecord Simulator::emit(EventKind kind, NodeId node, std::optional<Transition> tr, std::string summary,
                            std::string detail)
{
    EventRecord e;
    e.tick = tick_;
    e.elapsed_seconds = static_cast<double>(tick_) * config_.seconds_per_tick;
    e.node = node;
    e.component_id = comp(node).id;
    e.kind = kind;
    e.transition = tr;
    e.summary = std::move(summary);
    e.detail = std::move(detail);
    e.event_id = sink_->append(e);
    collected_.push_back(e);
    return e;
}

void Simulator::transition(ComponentState& c, ComponentStatus to, std::string summary, std::string detail)
{
    const Transition tr{c.status, to};
    c.status = to;
    c.status_since = tick_;
    emit(EventKind::Transition, c.node, tr, std::move(summary), std::move(detail));
}

EventRecord Simulator::record(EventKind kind, NodeId node, std::string summary, std::string detail)
{
    if (!config_.in_range(node))
        throw InvalidTarget("node " + to_string(node) + " out of range");
    collected_.clear();
    auto e = emit(kind, node, std::nullopt, std::move(summary), std::move(detail));
    collected_.clear();
    return e;
}

std::string Simulator::describe(const Cause& cause) const
{
    std::ostringstream s;
    switch (cause.kind)
    {
    case CauseKind::WatchdogExpired:
        s << "Watchdog timer on thread " << to_string(*cause.thread) << " expired: no heartbeat for " << cause.gap
          << " ticks (timeout " << config_.watchdog_timeout_ticks << ").";
        break;
    case CauseKind::ForcedTimeout:
        s << "Watchdog timer on thread " << to_string(*cause.thread)
          << " was instructed by the DIR Manager to behave as if a time-out had been detected.";
        break;
    case CauseKind::Trap:
        s << "Trap handler on thread " << to_string(*cause.thread) << " caught a " << trap_name(cause.trap)
          << ".";
        break;
    case CauseKind::HeartbeatLoss:
        s << "DIR Manager received no liveness heartbeat for " << cause.gap << " ticks (timeout "
          << config_.watchdog_timeout_ticks << ").";
        break;
    case CauseKind::Reboot:
        s << "Node reboot requested.";
        break;
    }
    return s.str();
}

bool Simulator::watchdog_armed(const ThreadState& t) const
{
    return t.watched && !t.watchdog_suspended && comp(t.id.node).status != ComponentStatus::Killed;
}

// ---------------------------------------------------------------------------
// Tick driver
// ---------------------------------------------------------------------------

std::vector<EventRecord> Simulator::step()
{
    collected_.clear();
    if (failed_)
        return {};
    ++tick_;

    for (auto& c : components_)
        if (c.status == ComponentStatus::Recovering && c.recovery_end == tick_)
            complete_recovery(c);

    for (auto& c : components_)
    {
        if (failed_)
            break;
        if (c.status_since >= tick_)
            continue;
        if (c.status == ComponentStatus::Isolated)
            begin_isolated_exit(c);
        else if (c.status == ComponentStatus::Faulty)
            transition(c, ComponentStatus::Isolated, "isolated by DIR net",
                       "The DIR net isolated " + role_name(c.role) + " " + c.id + " on node " +
                           std::to_string(c.node.index) + ".\nIts threads are excluded from the application.");
    }

    if (!failed_)
    {
        deliver_messages();
        send_heartbeats();
        check_watchdogs();
    }
    if (!failed_)
        check_liveness();
    if (!failed_)
        run_directives();
    return std::exchange(collected_, {});
}

void Simulator::deliver_messages()
{
    std::vector<Message> pending;
    pending.swap(in_flight_);
    for (const auto& m : pending)
    {
        const NodeId to = m.to.value_or(manager_);
        if (to == m.from)
            continue;
        auto& stats = link_stats_[{m.from.index, to.index}];
        if (down_links_.count(link_key(m.from, to)) != 0)
        {
            ++stats.dropped;
            continue;
        }
        ++stats.delivered;
        if (!m.to)
            comp(m.from).liveness_last = tick_;
    }
}

void Simulator::send_heartbeats()
{
    for (auto& [id, t] : threads_)
        if (t.life == ThreadLife::Alive && comp(id.node).status != ComponentStatus::Killed)
            t.last_heartbeat = tick_;

    for (const auto& c : components_)
    {
        if (c.status != ComponentStatus::OK)
            continue;
        if (c.node == manager_)
        {
            for (const auto& other : components_)
                if (other.node != c.node)
                    in_flight_.push_back(Message{c.node, other.node, tick_});
        }
        else
        {
            in_flight_.push_back(Message{c.node, std::nullopt, tick_});
        }
    }
}

void Simulator::check_watchdogs()
{
    for (auto& [id, t] : threads_)
    {
        if (failed_)
            return;
        if (!watchdog_armed(t) || t.watchdog_latched)
            continue;
        const Tick gap = tick_ - t.last_heartbeat;
        if (gap < config_.watchdog_timeout_ticks)
            continue;
        t.watchdog_latched = true;
        detect(comp(id.node), Cause{CauseKind::WatchdogExpired, id, TrapKind::SegViol, gap});
    }
}

void Simulator::check_liveness()
{
    if (comp(manager_).status != ComponentStatus::OK)
        return;
    for (auto& c : components_)
    {
        if (failed_)
            return;
        if (c.node == manager_ || c.status != ComponentStatus::OK)
            continue;
        const Tick gap = tick_ - c.liveness_last;
        if (gap < config_.watchdog_timeout_ticks)
            continue;
        c.liveness_last = tick_;
        detect(c, Cause{CauseKind::HeartbeatLoss, std::nullopt, TrapKind::SegViol, gap});
    }
}

// ---------------------------------------------------------------------------
// Detection, isolation, recovery
// ---------------------------------------------------------------------------

void Simulator::detect(ComponentState& c, Cause cause)
{
    switch (c.status)
    {
    case ComponentStatus::OK: {
        auto detail = describe(cause) + "\n" + role_name(c.role) + " " + c.id + " on node " +
                      std::to_string(c.node.index) + " marked Faulty.";
        std::string summary;
        switch (cause.kind)
        {
        case CauseKind::WatchdogExpired:
            summary = "watchdog timeout on thread " + to_string(*cause.thread);
            break;
        case CauseKind::ForcedTimeout:
            summary = "forced watchdog timeout on thread " + to_string(*cause.thread);
            break;
        case CauseKind::Trap:
            summary = "trap caught";
            break;
        case CauseKind::HeartbeatLoss:
            summary = "liveness heartbeat lost";
            break;
        case CauseKind::Reboot:
            summary = "node reboot requested";
            break;
        }
        c.causes.push_back(cause);
        transition(c, ComponentStatus::Faulty, std::move(summary), std::move(detail));
        if (c.node == manager_)
            run_election();
        break;
    }
    case ComponentStatus::Faulty:
    case ComponentStatus::Isolated:
        c.causes.push_back(cause);
        break;
    case ComponentStatus::Recovering:
        c.queued.push_back(cause);
        break;
    case ComponentStatus::Killed:
        break;
    }
}

void Simulator::begin_isolated_exit(ComponentState& c)
{
    const bool rebooting = std::any_of(c.causes.begin(), c.causes.end(),
                                       [](const Cause& k) { return k.kind == CauseKind::Reboot; });
    if (!rebooting && !config_.has_rtool(c.node))
    {
        for (const auto& t : c.threads)
        {
            auto& ts = thread_state(t);
            ts.life = ThreadLife::Dead;
            ts.watchdog_suspended = true;
        }
        transition(c, ComponentStatus::Killed, "killed: no recovery tool",
                   "No Rtool is available on node " + std::to_string(c.node.index) + ".\n" + role_name(c.role) +
                       " " + c.id + " is killed together with its threads.");
        return;
    }

    c.recovery_end = tick_ + config_.recovery_ticks;
    std::vector<ThreadId> trapped;
    std::ostringstream plan;
    if (rebooting)
    {
        plan << "Rtool NodeReboot: all " << c.threads.size() << " threads stopped, node restarting.";
        c.restarting = c.threads;
    }
    else
    {
        std::set<ThreadId> restart;
        bool reachability = false;
        for (const auto& k : c.causes)
        {
            if (k.kind == CauseKind::Trap)
                trapped.push_back(*k.thread);
            else if (k.kind == CauseKind::HeartbeatLoss)
                reachability = true;
            else if (k.thread)
                restart.insert(*k.thread);
        }
        c.restarting.assign(restart.begin(), restart.end());
        if (!c.restarting.empty())
        {
            plan << "Rtool ThreadRestart: restarting";
            for (const auto& t : c.restarting)
                plan << " " << to_string(t);
            plan << ".";
        }
        if (reachability)
            plan << (plan.tellp() > 0 ? "\n" : "") << "Rtool NodeReboot: re-establishing contact with the Manager.";
        if (!trapped.empty())
            plan << (plan.tellp() > 0 ? "\n" : "") << "Trapped threads are relocated to another node.";
    }
    for (const auto& t : c.restarting)
    {
        auto& ts = thread_state(t);
        ts.life = ThreadLife::Dead;
        ts.watchdog_suspended = true;
    }
    transition(c, ComponentStatus::Recovering, "recovery started",
               plan.str() + "\nRecovery budget: " + std::to_string(config_.recovery_ticks) + " ticks.");
    for (const auto& t : trapped)
        if (threads_.count(t) != 0 && !relocate_default(t))
            c.relocation_failed = true;
}

void Simulator::complete_recovery(ComponentState& c)
{
    bool ok = !c.relocation_failed;
    std::string why;
    if (!ok)
        why = "a trapped thread could not be relocated";
    const bool reachability = std::any_of(c.causes.begin(), c.causes.end(),
                                          [](const Cause& k) { return k.kind == CauseKind::HeartbeatLoss; });
    if (ok && reachability && c.node != manager_ && down_links_.count(link_key(c.node, manager_)) != 0)
    {
        ok = false;
        why = "link to the Manager on node " + std::to_string(manager_.index) + " is still down";
    }

    if (!ok)
    {
        for (const auto& t : c.threads)
        {
            auto& ts = thread_state(t);
            ts.life = ThreadLife::Dead;
            ts.watchdog_suspended = true;
        }
        c.causes.clear();
        c.queued.clear();
        c.restarting.clear();
        transition(c, ComponentStatus::Killed, "recovery failed",
                   "Recovery of " + c.id + " failed: " + why + ".\nThe component is killed.");
        return;
    }

    for (const auto& t : c.restarting)
    {
        auto it = threads_.find(t);
        if (it == threads_.end())
            continue;
        it->second.life = ThreadLife::Alive;
        it->second.watchdog_suspended = false;
        it->second.watchdog_latched = false;
        it->second.last_heartbeat = tick_;
    }
    std::ostringstream detail;
    detail << role_name(c.role) << " " << c.id << " recovered after " << config_.recovery_ticks << " ticks.";
    if (!c.restarting.empty())
    {
        detail << "\nRestarted threads:";
        for (const auto& t : c.restarting)
            detail << " " << to_string(t);
    }
    c.causes.clear();
    c.restarting.clear();
    c.relocation_failed = false;
    c.liveness_last = tick_;
    transition(c, ComponentStatus::OK, "recovered", detail.str());

    if (!c.queued.empty())
    {
        auto queued = std::exchange(c.queued, {});
        auto first = queued.front();
        queued.erase(queued.begin());
        detect(c, first);
        for (auto& k : queued)
            c.causes.push_back(k);
    }
}

bool Simulator::relocate_default(const ThreadId& thread)
{
    const NodeId source = thread.node;
    for (const auto& c : components_)
    {
        if (c.node == source || c.status != ComponentStatus::OK)
            continue;
        do_relocate(thread, c.node);
        return true;
    }
    auto& ts = thread_state(thread);
    ts.life = ThreadLife::Dead;
    emit(EventKind::RelocationFailed, source, std::nullopt, "relocation failed",
         "No node with an OK component is available to host thread " + to_string(thread) +
             ".\nThe thread remains dead.");
    return false;
}

void Simulator::do_relocate(const ThreadId& thread, NodeId to)
{
    auto old = thread_state(thread);
    auto& src = host_of(thread);
    src.threads.erase(std::remove(src.threads.begin(), src.threads.end(), thread), src.threads.end());
    src.restarting.erase(std::remove(src.restarting.begin(), src.restarting.end(), thread), src.restarting.end());
    threads_.erase(thread);

    ThreadId fresh{to, next_local_index_[to.index]++};
    ThreadState ts;
    ts.id = fresh;
    ts.watched = old.watched;
    ts.trap_handled = old.trap_handled;
    ts.last_heartbeat = tick_;
    threads_.emplace(fresh, ts);
    comp(to).threads.push_back(fresh);

    emit(EventKind::Relocation, thread.node, std::nullopt, "thread " + to_string(thread) + " relocated",
         "Thread " + to_string(thread) + " (" + std::string(to_string(old.life)) + ") moved to node " +
             std::to_string(to.index) + " as " + to_string(fresh) + ".\nIts Dtools follow it.");
    emit(EventKind::Relocation, to, std::nullopt, "thread " + to_string(fresh) + " received",
         "Thread " + to_string(fresh) + " restarted here, relocated from node " + std::to_string(thread.node.index) +
             " where it was " + to_string(thread) + ".");
}

void Simulator::run_election()
{
    const NodeId old = manager_;
    std::optional<NodeId> chosen;
    for (const auto& c : components_)
        if (c.role == ComponentRole::BackupAgent && c.status == ComponentStatus::OK)
        {
            chosen = c.node;
            break;
        }
    if (!chosen)
    {
        failed_ = true;
        emit(EventKind::SystemFailed, old, std::nullopt, "system failed",
             "The DIR Manager on node " + std::to_string(old.index) + " is " +
                 std::string(to_string(comp(old).status)) +
                 " and no Backup Agent is OK.\nNo Manager can be elected; the system halts.");
        return;
    }
    comp(old).role = ComponentRole::Agent;
    comp(*chosen).role = ComponentRole::Manager;
    manager_ = *chosen;
    for (auto& c : components_)
        c.liveness_last = tick_;
    emit(EventKind::Election, *chosen, std::nullopt, "elected DIR Manager",
         "Backup Agent " + comp(*chosen).id + " on node " + std::to_string(chosen->index) +
             " elected DIR Manager.\nFormer Manager " + comp(old).id + " on node " + std::to_string(old.index) +
             " (" + std::string(to_string(comp(old).status)) + ") continues as Agent.");
}

std::optional<NodeId> Simulator::elect_manager()
{
    collected_.clear();
    if (failed_)
        return std::nullopt;
    const auto st = comp(manager_).status;
    if (st == ComponentStatus::OK || st == ComponentStatus::Recovering)
        throw PreconditionError("Manager on node " + to_string(manager_) + " is " + std::string(to_string(st)) +
                                "; election requires Faulty, Isolated or Killed");
    run_election();
    if (failed_)
        return std::nullopt;
    return manager_;
}

// ---------------------------------------------------------------------------
// Fault operations
// ---------------------------------------------------------------------------

std::vector<EventRecord> Simulator::raise_trap(const ThreadId& thread, TrapKind kind)
{
    collected_.clear();
    if (failed_)
        return {};
    auto& ts = thread_state(thread);
    if (ts.life != ThreadLife::Alive)
        throw InvalidTarget("thread " + to_string(thread) + " is " + std::string(to_string(ts.life)));
    if (!ts.trap_handled)
    {
        ts.life = ThreadLife::Dead;
        return {};
    }
    ts.life = ThreadLife::Trapped;
    detect(host_of(thread), Cause{CauseKind::Trap, thread, kind, 0});
    return std::exchange(collected_, {});
}

std::vector<EventRecord> Simulator::relocate_thread(const ThreadId& thread, std::optional<NodeId> to)
{
    collected_.clear();
    if (failed_)
        return {};
    thread_state(thread);
    if (to)
    {
        if (!config_.in_range(*to))
            throw InvalidTarget("node " + to_string(*to) + " out of range");
        if (*to == thread.node)
            throw InvalidTarget("thread " + to_string(thread) + " already on node " + to_string(*to));
        if (comp(*to).status != ComponentStatus::OK)
            throw InvalidTarget("destination node " + to_string(*to) + " is " +
                                std::string(to_string(comp(*to).status)));
        do_relocate(thread, *to);
    }
    else
    {
        relocate_default(thread);
    }
    return std::exchange(collected_, {});
}

std::vector<EventRecord> Simulator::set_link(NodeId a, NodeId b, bool up)
{
    collected_.clear();
    if (!config_.in_range(a) || !config_.in_range(b))
        throw InvalidTarget("link endpoint out of range");
    if (a == b)
        throw InvalidTarget("link endpoints must differ (got " + to_string(a) + "," + to_string(b) + ")");
    if (failed_)
        return {};
    if (up)
        down_links_.erase(link_key(a, b));
    else
        down_links_.insert(link_key(a, b));
    const auto name = "link " + to_string(a) + "-" + to_string(b);
    emit(EventKind::Link, a, std::nullopt, name + (up ? " up" : " down"),
         up ? "Messages between nodes " + to_string(a) + " and " + to_string(b) + " are delivered again."
            : "Messages between nodes " + to_string(a) + " and " + to_string(b) + " are dropped.");
    return std::exchange(collected_, {});
}

std::vector<EventRecord> Simulator::reboot_node(NodeId node)
{
    collected_.clear();
    if (!config_.in_range(node))
        throw InvalidTarget("node " + to_string(node) + " out of range");
    if (failed_)
        return {};
    auto& c = comp(node);
    const Cause reboot{CauseKind::Reboot, std::nullopt, TrapKind::SegViol, 0};
    switch (c.status)
    {
    case ComponentStatus::Killed:
        emit(EventKind::Notice, node, std::nullopt, "reboot of killed node ignored",
             "Node " + to_string(node) + " hosts a Killed component; the reboot request has no effect.");
        return std::exchange(collected_, {});
    case ComponentStatus::Recovering:
        c.queued.push_back(reboot);
        emit(EventKind::Notice, node, std::nullopt, "reboot queued",
             "Node " + to_string(node) + " is recovering; the reboot runs once the recovery completes.");
        return std::exchange(collected_, {});
    case ComponentStatus::OK:
        detect(c, reboot);
        if (failed_)
            return std::exchange(collected_, {});
        [[fallthrough]];
    case ComponentStatus::Faulty:
        if (c.status == ComponentStatus::Faulty)
        {
            if (c.causes.empty() || c.causes.back().kind != CauseKind::Reboot)
                c.causes.push_back(reboot);
            transition(c, ComponentStatus::Isolated, "isolated for reboot",
                       "The DIR net isolated " + c.id + " on node " + to_string(node) + " ahead of the reboot.");
        }
        [[fallthrough]];
    case ComponentStatus::Isolated:
        if (std::none_of(c.causes.begin(), c.causes.end(),
                         [](const Cause& k) { return k.kind == CauseKind::Reboot; }))
            c.causes.push_back(reboot);
        begin_isolated_exit(c);
        break;
    }
    return std::exchange(collected_, {});
}

std::vector<EventRecord> Simulator::kill_thread(const ThreadId& thread)
{
    collected_.clear();
    auto& ts = thread_state(thread);
    if (ts.life != ThreadLife::Alive)
        throw InvalidTarget("thread " + to_string(thread) + " is already " + std::string(to_string(ts.life)));
    if (failed_)
        return {};
    ts.life = ThreadLife::Dead;
    return {};
}

std::optional<ThreadId> Simulator::resolve_watchdog(const WatchdogRef& ref) const
{
    if (!config_.in_range(ref.node))
        return std::nullopt;
    for (const auto& t : comp(ref.node).threads)
    {
        if (ref.local_index && t.local_index != *ref.local_index)
            continue;
        auto it = threads_.find(t);
        if (it != threads_.end() && watchdog_armed(it->second))
            return t;
    }
    return std::nullopt;
}

std::vector<EventRecord> Simulator::force_watchdog_timeout(const WatchdogRef& ref)
{
    collected_.clear();
    if (!config_.in_range(ref.node))
        throw InvalidTarget("node " + to_string(ref.node) + " out of range");
    auto target = resolve_watchdog(ref);
    if (!target)
        throw InvalidTarget("no armed watchdog timer on node " + to_string(ref.node) +
                            (ref.local_index ? " for thread " + std::to_string(*ref.local_index) : std::string{}));
    if (failed_)
        return {};
    detect(comp(ref.node), Cause{CauseKind::ForcedTimeout, *target, TrapKind::SegViol, 0});
    return std::exchange(collected_, {});
}

// ---------------------------------------------------------------------------
// Manager directives
// ---------------------------------------------------------------------------

bool Simulator::submit_directive(ManagerDirective d)
{
    collected_.clear();
    directives_.push_back(std::move(d));
    const auto before = directives_.size();
    run_directives();
    collected_.clear();
    return directives_.size() < before;
}

void Simulator::run_directives()
{
    while (!directives_.empty() && !failed_ && comp(manager_).status == ComponentStatus::OK)
    {
        auto d = directives_.front();
        directives_.erase(directives_.begin());
        execute_directive(d);
    }
}

void Simulator::execute_directive(const ManagerDirective& d)
{
    const NodeId node = d.action == ManagerDirective::Action::ForceWatchdogTimeout ? d.watchdog.node : d.thread.node;
    auto keep = std::exchange(collected_, {});
    std::vector<EventRecord> produced;
    try
    {
        switch (d.action)
        {
        case ManagerDirective::Action::RaiseTrap:
            produced = raise_trap(d.thread, d.trap);
            break;
        case ManagerDirective::Action::KillThread:
            produced = kill_thread(d.thread);
            break;
        case ManagerDirective::Action::ForceWatchdogTimeout:
            produced = force_watchdog_timeout(d.watchdog);
            break;
        }
    }
    catch (const InvalidTarget& e)
    {
        emit(EventKind::Notice, node, std::nullopt, "injection had no effect",
             "Request " + d.request_id + " could not be carried out by the DIR Manager:\n" + e.what());
        produced = std::exchange(collected_, {});
    }
    keep.insert(keep.end(), produced.begin(), produced.end());
    collected_ = std::move(keep);
}

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

Component Simulator::component(NodeId node) const
{
    if (!config_.in_range(node))
        throw InvalidTarget("node " + to_string(node) + " out of range");
    const auto& c = comp(node);
    return Component{c.id, c.node, c.role, c.status, c.threads};
}

std::vector<Component> Simulator::components() const
{
    std::vector<Component> out;
    for (const auto& c : components_)
        out.push_back(Component{c.id, c.node, c.role, c.status, c.threads});
    return out;
}

std::optional<ThreadView> Simulator::thread(const ThreadId& id) const
{
    auto it = threads_.find(id);
    if (it == threads_.end())
        return std::nullopt;
    const auto& t = it->second;
    return ThreadView{t.id, t.life, t.watched, t.trap_handled, watchdog_armed(t), t.last_heartbeat};
}

bool Simulator::link_up(NodeId a, NodeId b) const
{
    return down_links_.count(link_key(a, b)) == 0;
}

LinkStats Simulator::link_stats(NodeId from, NodeId to) const
{
    auto it = link_stats_.find({from.index, to.index});
    return it == link_stats_.end() ? LinkStats{} : it->second;
}

} // namespace eftos
