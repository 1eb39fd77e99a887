#include "eftos/injector.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace eftos {

namespace {

constexpr std::pair<FaultKind, std::string_view> kFaultNames[] = {
    {FaultKind::DivZero, "trap-divzero"},       {FaultKind::SegViol, "trap-segv"},
    {FaultKind::LinkFailure, "link-down"},      {FaultKind::NodeReboot, "reboot"},
    {FaultKind::ThreadKill, "kill-thread"},     {FaultKind::WatchdogTimeout, "watchdog-timeout"},
};

std::string opt_tick(const std::optional<Tick>& t)
{
    return t ? std::to_string(*t) : "-";
}

} // namespace

std::string_view to_string(FaultKind k)
{
    for (const auto& [kind, name] : kFaultNames)
        if (kind == k)
            return name;
    return "?";
}

FaultKind parse_fault_kind(std::string_view s)
{
    for (const auto& [kind, name] : kFaultNames)
        if (name == s)
            return kind;
    throw InvalidTarget("unknown fault kind '" + std::string(s) + "'");
}

std::string_view to_string(RoutingClass r)
{
    return r == RoutingClass::SystemLevel ? "SystemLevel" : "ApplicationLevel";
}

// ---------------------------------------------------------------------------
// FaultSpec
// ---------------------------------------------------------------------------

void validate(const FaultSpec& spec, const SimConfig& config)
{
    auto node_ok = [&](NodeId n) {
        if (!config.in_range(n))
            throw InvalidTarget("target node " + to_string(n) + " out of range (node_count " +
                                std::to_string(config.node_count) + ")");
    };
    switch (spec.kind)
    {
    case FaultKind::DivZero:
    case FaultKind::SegViol:
    case FaultKind::ThreadKill: {
        const auto* t = std::get_if<ThreadId>(&spec.target);
        if (t == nullptr)
            throw InvalidTarget(std::string(to_string(spec.kind)) + " needs a thread target (node, index)");
        node_ok(t->node);
        break;
    }
    case FaultKind::LinkFailure: {
        const auto* l = std::get_if<LinkTarget>(&spec.target);
        if (l == nullptr)
            throw InvalidTarget("link-down needs a node pair");
        node_ok(l->a);
        node_ok(l->b);
        if (l->a == l->b)
            throw InvalidTarget("link-down endpoints must differ");
        break;
    }
    case FaultKind::NodeReboot: {
        const auto* n = std::get_if<NodeId>(&spec.target);
        if (n == nullptr)
            throw InvalidTarget("reboot needs a node target");
        node_ok(*n);
        break;
    }
    case FaultKind::WatchdogTimeout: {
        const auto* w = std::get_if<WatchdogRef>(&spec.target);
        if (w == nullptr)
            throw InvalidTarget("watchdog-timeout needs a node (and optional thread index)");
        node_ok(w->node);
        break;
    }
    }
}

std::vector<NodeId> target_nodes(const FaultSpec& spec)
{
    return std::visit(
        [](const auto& t) -> std::vector<NodeId> {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, ThreadId>)
                return {t.node};
            else if constexpr (std::is_same_v<T, LinkTarget>)
                return {t.a, t.b};
            else if constexpr (std::is_same_v<T, NodeId>)
                return {t};
            else
                return {t.node};
        },
        spec.target);
}

namespace {

nlohmann::json target_json(const FaultTarget& target)
{
    return std::visit(
        [](const auto& t) -> nlohmann::json {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, ThreadId>)
                return nlohmann::json::array({t.node.index, t.local_index});
            else if constexpr (std::is_same_v<T, LinkTarget>)
                return nlohmann::json::array({t.a.index, t.b.index});
            else if constexpr (std::is_same_v<T, NodeId>)
                return nlohmann::json::array({t.index});
            else if (t.local_index)
                return nlohmann::json::array({t.node.index, *t.local_index});
            else
                return nlohmann::json::array({t.node.index});
        },
        target);
}

FaultTarget make_target(FaultKind kind, const std::vector<std::uint32_t>& v)
{
    auto need = [&](std::size_t lo, std::size_t hi) {
        if (v.size() < lo || v.size() > hi)
            throw InvalidTarget(std::string(to_string(kind)) + " takes " +
                                (lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi)) +
                                " target values, got " + std::to_string(v.size()));
    };
    switch (kind)
    {
    case FaultKind::DivZero:
    case FaultKind::SegViol:
    case FaultKind::ThreadKill:
        need(2, 2);
        return ThreadId{NodeId{v[0]}, v[1]};
    case FaultKind::LinkFailure:
        need(2, 2);
        return LinkTarget{NodeId{v[0]}, NodeId{v[1]}};
    case FaultKind::NodeReboot:
        need(1, 1);
        return NodeId{v[0]};
    case FaultKind::WatchdogTimeout:
        need(1, 2);
        return WatchdogRef{NodeId{v[0]}, v.size() == 2 ? std::optional<std::uint32_t>(v[1]) : std::nullopt};
    }
    throw InvalidTarget("unknown fault kind");
}

} // namespace

std::string describe(const FaultSpec& spec)
{
    std::string out(to_string(spec.kind));
    for (const auto& v : target_json(spec.target))
        out += " " + std::to_string(v.get<std::uint32_t>());
    return out;
}

nlohmann::json to_json(const FaultSpec& spec)
{
    return nlohmann::json{
        {"kind", to_string(spec.kind)},
        {"target", target_json(spec.target)},
        {"at_tick", spec.at_tick ? nlohmann::json(*spec.at_tick) : nlohmann::json(nullptr)},
        {"request_id", spec.request_id},
    };
}

FaultSpec fault_from_json(const nlohmann::json& j)
{
    try
    {
        FaultSpec spec;
        spec.kind = parse_fault_kind(j.at("kind").get<std::string>());
        const auto& target = j.at("target");
        if (!target.is_array())
            throw InvalidTarget("target must be an array of non-negative integers");
        std::vector<std::uint32_t> values;
        for (const auto& v : target)
        {
            if (!v.is_number_unsigned())
                throw InvalidTarget("target must be an array of non-negative integers");
            values.push_back(v.get<std::uint32_t>());
        }
        spec.target = make_target(spec.kind, values);
        if (j.contains("at_tick") && !j.at("at_tick").is_null())
            spec.at_tick = j.at("at_tick").get<Tick>();
        if (j.contains("request_id") && !j.at("request_id").is_null())
            spec.request_id = j.at("request_id").get<std::string>();
        return spec;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw InvalidTarget(std::string("malformed fault spec: ") + e.what());
    }
}

nlohmann::json to_json(const InjectionReceipt& r)
{
    return nlohmann::json{
        {"request_id", r.request_id},
        {"routing", to_string(r.routing)},
        {"scheduled_tick", r.scheduled_tick},
        {"queued", r.queued},
        {"marker_event_id", r.marker_event_id ? nlohmann::json(*r.marker_event_id) : nlohmann::json(nullptr)},
        {"resulting_event_ids", r.resulting_event_ids},
        {"fault", to_json(r.spec)},
    };
}

InjectionReceipt receipt_from_json(const nlohmann::json& j)
{
    InjectionReceipt r;
    r.request_id = j.at("request_id").get<std::string>();
    r.routing = j.at("routing").get<std::string>() == "SystemLevel" ? RoutingClass::SystemLevel
                                                                     : RoutingClass::ApplicationLevel;
    r.scheduled_tick = j.at("scheduled_tick").get<Tick>();
    r.queued = j.value("queued", false);
    if (j.contains("marker_event_id") && !j.at("marker_event_id").is_null())
        r.marker_event_id = j.at("marker_event_id").get<EventId>();
    r.resulting_event_ids = j.value("resulting_event_ids", std::vector<EventId>{});
    if (j.contains("fault"))
        r.spec = fault_from_json(j.at("fault"));
    return r;
}

nlohmann::json to_json(const FeedbackReport& r)
{
    auto opt = [](const std::optional<Tick>& t) { return t ? nlohmann::json(*t) : nlohmann::json(nullptr); };
    return nlohmann::json{
        {"injection", to_json(r.injection)},
        {"detected", r.detected},
        {"detection_latency_ticks", opt(r.detection_latency_ticks)},
        {"isolation_latency_ticks", opt(r.isolation_latency_ticks)},
        {"recovery_latency_ticks", opt(r.recovery_latency_ticks)},
        {"final_status", to_string(r.final_status)},
        {"resolved", r.resolved},
    };
}

// ---------------------------------------------------------------------------
// Feedback
// ---------------------------------------------------------------------------

FeedbackReport observe(InjectionReceipt& receipt, const EventStore& store, Tick current_tick, Tick window)
{
    FeedbackReport rep;
    rep.injection = receipt.spec;
    const auto nodes = target_nodes(receipt.spec);
    NodeId subject = nodes.front();
    if (!receipt.marker_event_id)
    {
        rep.final_status = store.read_global().nodes.at(subject.index).status;
        return rep;
    }
    const Tick marker_tick = *receipt.marker_tick;
    const Tick horizon = marker_tick + window;

    receipt.resulting_event_ids.clear();
    bool terminal = false;
    std::optional<NodeId> detected_on;
    for (const auto& e : store.events_after(*receipt.marker_event_id))
    {
        if (e.tick > horizon)
            break;
        if (std::find(nodes.begin(), nodes.end(), e.node) == nodes.end())
            continue;
        if (detected_on && e.node != *detected_on)
            continue;
        receipt.resulting_event_ids.push_back(e.event_id);
        if (!e.transition)
            continue;
        const auto [from, to] = *e.transition;
        if (to == ComponentStatus::Faulty && !rep.detection_latency_ticks)
        {
            rep.detection_latency_ticks = e.tick - marker_tick;
            detected_on = e.node;
        }
        else if (to == ComponentStatus::Isolated && !rep.isolation_latency_ticks)
        {
            rep.isolation_latency_ticks = e.tick - marker_tick;
        }
        else if (from == ComponentStatus::Recovering && (to == ComponentStatus::OK || to == ComponentStatus::Killed))
        {
            rep.recovery_latency_ticks = e.tick - marker_tick;
            terminal = true;
        }
        else if (from == ComponentStatus::Isolated && to == ComponentStatus::Killed)
        {
            terminal = true;
        }
        if (terminal)
            break;
    }
    rep.detected = rep.detection_latency_ticks.has_value();
    if (!rep.detected)
    {
        rep.isolation_latency_ticks.reset();
        rep.recovery_latency_ticks.reset();
    }
    if (detected_on)
        subject = *detected_on;
    rep.final_status = store.read_global().nodes.at(subject.index).status;
    rep.resolved = terminal || current_tick >= horizon;
    return rep;
}

// ---------------------------------------------------------------------------
// Injector
// ---------------------------------------------------------------------------

Injector::Injector(Simulator& sim, const EventStore& store, InjectorOptions options)
    : sim_(sim), store_(store), options_(options), published_tick_(sim.tick())
{
}

Tick Injector::current_tick() const
{
    std::lock_guard lock(mutex_);
    return published_tick_;
}

InjectionReceipt Injector::inject(FaultSpec spec)
{
    std::lock_guard lock(mutex_);
    validate(spec, sim_.config());
    if (spec.request_id.empty())
    {
        do
            spec.request_id = "inj-" + std::to_string(next_auto_id_++);
        while (receipts_.count(spec.request_id) != 0);
    }
    if (receipts_.count(spec.request_id) != 0)
        throw ConflictError("request id '" + spec.request_id + "' already used");

    const Tick now = published_tick_;
    const Tick scheduled = spec.at_tick.value_or(now + 1);
    if (scheduled < now)
        throw InvalidTarget("tick " + std::to_string(scheduled) + " is in the past (now " + std::to_string(now) + ")");
    spec.at_tick = scheduled;

    const auto nodes = target_nodes(spec);
    for (auto& [id, other] : receipts_)
    {
        const auto other_nodes = target_nodes(other.spec);
        const bool overlap = std::any_of(nodes.begin(), nodes.end(), [&](NodeId n) {
            return std::find(other_nodes.begin(), other_nodes.end(), n) != other_nodes.end();
        });
        if (!overlap)
            continue;
        const Tick lo = std::min(scheduled, other.scheduled_tick);
        const Tick hi = std::max(scheduled, other.scheduled_tick);
        if (hi - lo >= options_.observation_window)
            continue;
        if (eftos::observe(other, store_, now, options_.observation_window).resolved)
            continue;
        throw InvalidTarget("overlaps unresolved injection '" + id + "' on the same target within the " +
                            std::to_string(options_.observation_window) + "-tick window");
    }

    InjectionReceipt r;
    r.request_id = spec.request_id;
    r.routing = classify(spec);
    r.scheduled_tick = scheduled;
    r.queued = r.routing == RoutingClass::ApplicationLevel &&
               (sim_.failed() || sim_.component(sim_.manager()).status != ComponentStatus::OK);
    r.spec = spec;
    receipts_.emplace(r.request_id, r);
    pending_.push_back(r.request_id);
    return r;
}

void Injector::execute(InjectionReceipt& r)
{
    const auto nodes = target_nodes(r.spec);
    std::ostringstream detail;
    detail << "Request " << r.request_id << ": " << describe(r.spec) << "\nRouting: " << to_string(r.routing)
           << "\nScheduled tick: " << r.scheduled_tick;
    const auto marker =
        sim_.record(EventKind::Injection, nodes.front(), "fault injected: " + describe(r.spec), detail.str());
    r.marker_event_id = marker.event_id;
    r.marker_tick = marker.tick;
    if (sim_.failed())
    {
        r.queued = r.routing == RoutingClass::ApplicationLevel;
        return;
    }

    try
    {
        switch (r.spec.kind)
        {
        case FaultKind::NodeReboot:
            sim_.reboot_node(std::get<NodeId>(r.spec.target));
            return;
        case FaultKind::LinkFailure: {
            const auto& l = std::get<LinkTarget>(r.spec.target);
            sim_.set_link(l.a, l.b, false);
            return;
        }
        default:
            break;
        }
    }
    catch (const InvalidTarget& e)
    {
        sim_.record(EventKind::Notice, nodes.front(), "injection had no effect",
                    "Request " + r.request_id + " could not be executed:\n" + e.what());
        return;
    }

    ManagerDirective d;
    d.request_id = r.request_id;
    switch (r.spec.kind)
    {
    case FaultKind::DivZero:
    case FaultKind::SegViol:
        d.action = ManagerDirective::Action::RaiseTrap;
        d.thread = std::get<ThreadId>(r.spec.target);
        d.trap = r.spec.kind == FaultKind::DivZero ? TrapKind::DivZero : TrapKind::SegViol;
        break;
    case FaultKind::ThreadKill:
        d.action = ManagerDirective::Action::KillThread;
        d.thread = std::get<ThreadId>(r.spec.target);
        break;
    case FaultKind::WatchdogTimeout:
        d.action = ManagerDirective::Action::ForceWatchdogTimeout;
        d.watchdog = std::get<WatchdogRef>(r.spec.target);
        break;
    default:
        return;
    }
    r.queued = !sim_.submit_directive(std::move(d));
}

void Injector::execute_due()
{
    std::lock_guard lock(mutex_);
    published_tick_ = sim_.tick();
    std::vector<std::string> still;
    for (const auto& id : pending_)
    {
        auto& r = receipts_.at(id);
        if (r.scheduled_tick <= sim_.tick())
            execute(r);
        else
            still.push_back(id);
    }
    pending_ = std::move(still);
}

std::vector<EventRecord> Injector::advance()
{
    const EventId before = store_.last_event_id();
    if (options_.before_step)
        options_.before_step();
    {
        std::lock_guard lock(mutex_);
        sim_.step();
    }
    execute_due();
    return store_.events_after(before);
}

std::optional<InjectionReceipt> Injector::receipt(const std::string& request_id) const
{
    std::lock_guard lock(mutex_);
    auto it = receipts_.find(request_id);
    if (it == receipts_.end())
        return std::nullopt;
    return it->second;
}

FeedbackReport Injector::observe(const std::string& request_id)
{
    std::lock_guard lock(mutex_);
    auto it = receipts_.find(request_id);
    if (it == receipts_.end())
        throw NotFound("no injection '" + request_id + "'");
    return eftos::observe(it->second, store_, sim_.tick(), options_.observation_window);
}

// ---------------------------------------------------------------------------
// Loop
// ---------------------------------------------------------------------------

Expectation Expectation::any()
{
    return {"any", [](const FeedbackReport&) { return true; }};
}

Expectation Expectation::detected()
{
    return {"detected", [](const FeedbackReport& r) { return r.detected; }};
}

Expectation Expectation::undetected()
{
    return {"undetected", [](const FeedbackReport& r) { return r.resolved && !r.detected; }};
}

Expectation Expectation::recovered()
{
    return {"recovered", [](const FeedbackReport& r) {
                return r.detected && r.recovery_latency_ticks && r.final_status == ComponentStatus::OK;
            }};
}

Expectation Expectation::killed()
{
    return {"killed", [](const FeedbackReport& r) { return r.final_status == ComponentStatus::Killed; }};
}

Expectation Expectation::named(std::string_view name)
{
    if (name == "any")
        return any();
    if (name == "detected")
        return detected();
    if (name == "undetected")
        return undetected();
    if (name == "recovered")
        return recovered();
    if (name == "killed")
        return killed();
    throw InvalidTarget("unknown expectation '" + std::string(name) + "'");
}

bool LoopReport::all_passed() const
{
    return !aborted && std::all_of(iterations.begin(), iterations.end(), [](const auto& it) { return it.passed; });
}

nlohmann::json LoopReport::to_json() const
{
    auto rows = nlohmann::json::array();
    for (const auto& it : iterations)
    {
        nlohmann::json row{
            {"index", it.index},
            {"fault", eftos::to_json(it.spec)},
            {"expectation", it.expectation},
            {"passed", it.passed},
            {"note", it.note},
        };
        row["receipt"] = it.receipt ? eftos::to_json(*it.receipt) : nlohmann::json(nullptr);
        row["feedback"] = it.report ? eftos::to_json(*it.report) : nlohmann::json(nullptr);
        rows.push_back(std::move(row));
    }
    return nlohmann::json{
        {"iterations", rows},
        {"aborted", aborted},
        {"system_failed", system_failed},
        {"final_tick", final_tick},
        {"all_passed", all_passed()},
    };
}

std::string LoopReport::table() const
{
    std::ostringstream out;
    out << std::left << std::setw(4) << "#" << std::setw(8) << "tick" << std::setw(24) << "fault" << std::setw(18)
        << "routing" << std::setw(10) << "detected" << std::setw(6) << "det" << std::setw(6) << "iso"
        << std::setw(6) << "rec" << std::setw(12) << "final" << std::setw(12) << "expect"
        << "verdict\n";
    for (const auto& it : iterations)
    {
        out << std::setw(4) << it.index << std::setw(8) << opt_tick(it.spec.at_tick) << std::setw(24)
            << describe(it.spec) << std::setw(18)
            << (it.receipt ? std::string(to_string(it.receipt->routing)) : std::string("-"));
        if (it.report)
            out << std::setw(10) << (it.report->detected ? "yes" : "no") << std::setw(6)
                << opt_tick(it.report->detection_latency_ticks) << std::setw(6)
                << opt_tick(it.report->isolation_latency_ticks) << std::setw(6)
                << opt_tick(it.report->recovery_latency_ticks) << std::setw(12)
                << to_string(it.report->final_status);
        else
            out << std::setw(10) << "-" << std::setw(6) << "-" << std::setw(6) << "-" << std::setw(6) << "-"
                << std::setw(12) << "-";
        out << std::setw(12) << it.expectation << (it.passed ? "PASS" : "FAIL");
        if (!it.note.empty())
            out << "  (" << it.note << ")";
        out << "\n";
    }
    if (aborted)
        out << "loop aborted: " << (system_failed ? "system failed" : "incomplete") << "\n";
    out << (all_passed() ? "all expectations met" : "model is unsatisfying") << " at tick " << final_tick << "\n";
    return out.str();
}

nlohmann::json inject_reply(Injector& injector, const nlohmann::json& fault)
{
    try
    {
        return {{"ok", true}, {"receipt", to_json(injector.inject(fault_from_json(fault)))}};
    }
    catch (const ConflictError& e)
    {
        return {{"ok", false}, {"error", "conflict"}, {"message", e.what()}};
    }
    catch (const Error& e)
    {
        return {{"ok", false}, {"error", "invalid_target"}, {"message", e.what()}};
    }
}

LoopReport run_loop(const std::vector<ScenarioEntry>& scenario, Injector& injector)
{
    if (scenario.empty())
        throw PreconditionError("scenario is empty");
    auto& sim = injector.simulator();
    LoopReport report;
    for (std::size_t i = 0; i < scenario.size(); ++i)
    {
        const auto& entry = scenario[i];
        LoopIteration it;
        it.index = i + 1;
        it.spec = entry.spec;
        it.expectation = entry.expect.name;
        if (sim.failed())
        {
            report.aborted = true;
            break;
        }
        if (it.spec.at_tick && *it.spec.at_tick < sim.tick())
        {
            it.note = "rescheduled from tick " + std::to_string(*it.spec.at_tick);
            it.spec.at_tick = sim.tick();
        }
        try
        {
            it.receipt = injector.inject(it.spec);
        }
        catch (const Error& e)
        {
            it.note = std::string("rejected: ") + e.what();
            report.iterations.push_back(std::move(it));
            continue;
        }
        it.spec = it.receipt->spec;
        injector.execute_due();
        FeedbackReport fb = injector.observe(it.receipt->request_id);
        while (!fb.resolved && !sim.failed())
        {
            injector.advance();
            fb = injector.observe(it.receipt->request_id);
        }
        it.receipt = injector.receipt(it.receipt->request_id);
        it.report = fb;
        it.passed = entry.expect.holds(fb);
        report.iterations.push_back(std::move(it));
        if (sim.failed())
        {
            report.aborted = i + 1 < scenario.size();
            break;
        }
    }
    report.system_failed = sim.failed();
    report.final_tick = sim.tick();
    return report;
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size())
    {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r'))
            ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r')
            ++i;
        if (i > start)
            out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::uint64_t parse_number(std::string_view tok, std::size_t line, const char* what)
{
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size())
        throw ParseError(line, std::string("expected ") + what + ", got '" + std::string(tok) + "'");
    return v;
}

} // namespace

std::vector<ScenarioEntry> parse_scenario(std::string_view text)
{
    std::vector<ScenarioEntry> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size())
    {
        const auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        auto toks = split_ws(line);
        if (toks.empty())
            continue;
        if (toks[0] != "at")
            throw ParseError(line_no, "directive must start with 'at'");
        if (toks.size() < 3)
            throw ParseError(line_no, "expected 'at <tick> <fault-kind> <target...>'");

        ScenarioEntry entry;
        entry.line = line_no;
        entry.spec.at_tick = parse_number(toks[1], line_no, "tick");
        std::size_t k = 2;
        std::string kind(toks[k++]);
        if (kind == "trap")
        {
            if (k >= toks.size())
                throw ParseError(line_no, "trap needs a kind (segv or divzero)");
            kind = "trap-" + std::string(toks[k++]);
        }
        try
        {
            entry.spec.kind = parse_fault_kind(kind);
        }
        catch (const InvalidTarget&)
        {
            throw ParseError(line_no, "unknown fault kind '" + kind + "'");
        }
        std::vector<std::uint32_t> values;
        while (k < toks.size() && toks[k] != "expect" && toks[k] != "id")
        {
            const auto v = parse_number(toks[k++], line_no, "target index");
            if (v > UINT32_MAX)
                throw ParseError(line_no, "target index too large");
            values.push_back(static_cast<std::uint32_t>(v));
        }
        while (k < toks.size())
        {
            const auto key = toks[k++];
            if (k >= toks.size())
                throw ParseError(line_no, "'" + std::string(key) + "' needs a value");
            const auto value = toks[k++];
            if (key == "expect")
            {
                try
                {
                    entry.expect = Expectation::named(value);
                }
                catch (const InvalidTarget& e)
                {
                    throw ParseError(line_no, e.what());
                }
            }
            else if (key == "id")
            {
                entry.spec.request_id = std::string(value);
            }
            else
            {
                throw ParseError(line_no, "unexpected token '" + std::string(key) + "'");
            }
        }
        try
        {
            entry.spec.target = make_target(entry.spec.kind, values);
        }
        catch (const InvalidTarget& e)
        {
            throw ParseError(line_no, e.what());
        }
        out.push_back(std::move(entry));
    }
    return out;
}

std::vector<ScenarioEntry> load_scenario(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read scenario " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

} // namespace eftos
