#include "eftos/gateway.hpp"

#include "eftos/notify.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <iostream>

#include <unistd.h>

namespace eftos {

namespace {

using namespace std::chrono_literals;

nlohmann::json opt_status(const std::optional<Transition>& t, bool to)
{
    if (!t)
        return nullptr;
    return to_string(to ? t->to : t->from);
}

void log_line(const std::string& s)
{
    std::cerr << "eftos-gateway: " << s << "\n";
}

} // namespace

// ---------------------------------------------------------------------------
// View models
// ---------------------------------------------------------------------------

nlohmann::json global_view(const Snapshot& snap, const ViewMeta& meta)
{
    auto rows = nlohmann::json::array();
    for (const auto& r : snap.nodes)
        rows.push_back({
            {"node", r.node.index},
            {"component_id", r.component_id},
            {"role", to_string(r.role)},
            {"status", to_string(r.status)},
            {"color", color_of(r.status)},
            {"last_event_id", r.last_event_id},
            {"link", "/api/node/" + std::to_string(r.node.index)},
        });
    return {
        {"level", "Global"},
        {"event_id", snap.last_event_id},
        {"tick", snap.tick},
        {"elapsed_seconds", static_cast<double>(snap.tick) * meta.seconds_per_tick},
        {"system_failed", snap.system_failed},
        {"run_active", meta.run_active},
        {"poll_interval_ms", meta.poll_interval_ms},
        {"rows", std::move(rows)},
    };
}

nlohmann::json node_view(const NodeEventPage& page, const Snapshot& as_of)
{
    auto events = nlohmann::json::array();
    for (const auto& e : page.events)
        events.push_back({
            {"event_id", e.event_id},
            {"tick", e.tick},
            {"elapsed_seconds", e.elapsed_seconds},
            {"kind", to_string(e.kind)},
            {"from", opt_status(e.transition, false)},
            {"to", opt_status(e.transition, true)},
            {"color", e.transition ? nlohmann::json(color_of(e.transition->to)) : nlohmann::json(nullptr)},
            {"summary", e.summary},
            {"link", "/api/event/" + std::to_string(e.event_id)},
        });
    nlohmann::json j{
        {"level", "Node"},
        {"node", page.node.index},
        {"as_of_event_id", as_of.last_event_id},
        {"as_of_tick", as_of.tick},
        {"events", std::move(events)},
        {"back", "/api/global"},
    };
    if (page.node.index < as_of.nodes.size())
    {
        const auto& row = as_of.nodes[page.node.index];
        j["role"] = to_string(row.role);
        j["status"] = to_string(row.status);
        j["color"] = color_of(row.status);
    }
    return j;
}

nlohmann::json event_view(const EventRecord& e)
{
    return {
        {"level", "Event"},
        {"event", to_json(e)},
        {"color", e.transition ? nlohmann::json(color_of(e.transition->to)) : nlohmann::json(nullptr)},
        {"back", "/api/node/" + std::to_string(e.node.index)},
    };
}

// ---------------------------------------------------------------------------
// UpdateHub
// ---------------------------------------------------------------------------

UpdateHub::Subscription::~Subscription()
{
    if (hub_ && queue_)
        hub_->drop(queue_);
}

std::optional<Update> UpdateHub::Subscription::next(std::chrono::milliseconds timeout)
{
    if (!queue_)
        return std::nullopt;
    std::unique_lock lock(queue_->mutex);
    queue_->cv.wait_for(lock, timeout, [&] { return !queue_->items.empty() || queue_->closed; });
    if (queue_->items.empty())
        return std::nullopt;
    auto u = std::move(queue_->items.front());
    queue_->items.pop_front();
    return u;
}

bool UpdateHub::Subscription::closed() const
{
    if (!queue_)
        return true;
    std::lock_guard lock(queue_->mutex);
    return queue_->closed && queue_->items.empty();
}

UpdateHub::Subscription UpdateHub::subscribe()
{
    auto q = std::make_shared<Queue>();
    std::lock_guard lock(mutex_);
    q->items.push_back(current_);
    q->closed = closed_;
    queues_.push_back(q);
    return Subscription(this, q);
}

void UpdateHub::drop(const std::shared_ptr<Queue>& q)
{
    std::lock_guard lock(mutex_);
    queues_.erase(std::remove(queues_.begin(), queues_.end(), q), queues_.end());
}

void UpdateHub::reset(Update current)
{
    std::lock_guard lock(mutex_);
    current_ = std::move(current);
}

void UpdateHub::broadcast(Update u)
{
    std::lock_guard lock(mutex_);
    current_ = u;
    ++broadcasts_;
    for (const auto& q : queues_)
    {
        {
            std::lock_guard ql(q->mutex);
            q->items.push_back(u);
        }
        q->cv.notify_one();
    }
}

void UpdateHub::close()
{
    std::lock_guard lock(mutex_);
    closed_ = true;
    for (const auto& q : queues_)
    {
        {
            std::lock_guard ql(q->mutex);
            q->closed = true;
        }
        q->cv.notify_all();
    }
}

std::size_t UpdateHub::subscribers() const
{
    std::lock_guard lock(mutex_);
    return queues_.size();
}

std::uint64_t UpdateHub::broadcasts() const
{
    std::lock_guard lock(mutex_);
    return broadcasts_;
}

Update UpdateHub::current() const
{
    std::lock_guard lock(mutex_);
    return current_;
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(GatewayOptions options) : options_(std::move(options)), http_(std::make_unique<httplib::Server>())
{
}

Gateway::~Gateway()
{
    stop();
}

void Gateway::start()
{
    if (options_.store_dir && std::filesystem::exists(*options_.store_dir / EventStore::kConfigFile))
    {
        std::lock_guard lock(store_mutex_);
        try
        {
            open_store_locked(*options_.store_dir);
        }
        catch (const Error& e)
        {
            log_line(std::string("store not readable yet: ") + e.what());
        }
    }

    listener_ = net::listen_tcp(options_.notify);
    notify_port_ = net::local_port(listener_);

    http_->new_task_queue = [] { return new httplib::ThreadPool(32); };
    // Without SO_REUSEPORT a second gateway on the same port fails to bind.
    http_->set_socket_options([](socket_t sock) {
        int one = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    });
    install_routes();
    if (options_.http.port == 0)
    {
        const int port = http_->bind_to_any_port(options_.http.host);
        if (port <= 0)
            throw IoError("cannot bind HTTP on " + options_.http.str());
        http_port_ = static_cast<std::uint16_t>(port);
    }
    else
    {
        if (!http_->bind_to_port(options_.http.host, options_.http.port))
            throw IoError("cannot bind HTTP on " + options_.http.str() + " (port in use?)");
        http_port_ = options_.http.port;
    }
    http_thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void Gateway::stop()
{
    {
        std::lock_guard lock(wait_mutex_);
        if (stopping_.exchange(true))
            return;
    }
    hub_.close();
    listener_.shutdown();
    {
        std::lock_guard lock(conn_mutex_);
        if (conn_)
            conn_->shutdown();
    }
    if (accept_thread_.joinable())
        accept_thread_.join();
    http_->stop();
    if (http_thread_.joinable())
        http_thread_.join();
    listener_.close();
    wait_cv_.notify_all();
}

void Gateway::wait()
{
    std::unique_lock lock(wait_mutex_);
    wait_cv_.wait(lock, [&] { return stopping_.load(); });
}

std::vector<std::string> Gateway::protocol_errors() const
{
    std::lock_guard lock(log_mutex_);
    return protocol_errors_;
}

void Gateway::protocol_error(const std::string& what)
{
    log_line("protocol error: " + what);
    std::lock_guard lock(log_mutex_);
    protocol_errors_.push_back(what);
}

// --- notification side ----------------------------------------------------

void Gateway::accept_loop()
{
    std::thread worker;
    while (!stopping_)
    {
        auto conn = net::accept_tcp(listener_, 200ms);
        if (!conn.valid())
            continue;
        // A run that just ended may not have been reaped yet.
        for (int i = 0; i < 20 && connected_ && !stopping_; ++i)
            std::this_thread::sleep_for(50ms);
        if (connected_)
        {
            log_line("refused a second simulator connection");
            conn.close();
            continue;
        }
        if (worker.joinable())
            worker.join();
        connected_ = true;
        worker = std::thread([this, c = std::move(conn)]() mutable { serve_connection(std::move(c)); });
    }
    if (worker.joinable())
        worker.join();
}

void Gateway::serve_connection(net::Socket conn)
{
    {
        std::lock_guard lock(conn_mutex_);
        conn_ = &conn;
    }
    FrameReader frames;
    bool said_hello = false;
    EventId last_id = 0;
    char buf[8192];
    try
    {
        while (!stopping_)
        {
            const long n = conn.recv_some(buf, sizeof buf, 200ms);
            if (n < 0)
                continue;
            if (n == 0)
                break;
            frames.feed(std::string_view(buf, static_cast<std::size_t>(n)));
            while (auto payload = frames.next())
            {
                nlohmann::json msg;
                try
                {
                    msg = nlohmann::json::parse(*payload);
                }
                catch (const nlohmann::json::exception& e)
                {
                    throw ProtocolError(std::string("malformed frame: ") + e.what());
                }
                if (msg.is_object() && msg.value("kind", "") == "Receipt")
                {
                    on_receipt(msg);
                    continue;
                }
                const auto note = notification_from_json(msg);
                if (!said_hello && note.kind != NotificationKind::Hello)
                    throw ProtocolError("first message must be Hello, got " + std::string(to_string(note.kind)));
                switch (note.kind)
                {
                case NotificationKind::Hello:
                    if (said_hello)
                        throw ProtocolError("second Hello on one connection");
                    said_hello = true;
                    on_hello(note);
                    break;
                case NotificationKind::Transition:
                    if (note.event_id <= last_id)
                        throw ProtocolError("event id " + std::to_string(note.event_id) + " after " +
                                            std::to_string(last_id) + " (must strictly increase)");
                    last_id = note.event_id;
                    on_transition(note);
                    break;
                case NotificationKind::Shutdown:
                    run_active_ = false;
                    log_line("run ended at tick " + std::to_string(note.tick));
                    break;
                }
            }
        }
    }
    catch (const ProtocolError& e)
    {
        protocol_error(e.what());
    }
    catch (const Error& e)
    {
        log_line(std::string("connection error: ") + e.what());
    }
    {
        std::lock_guard lock(conn_mutex_);
        conn_ = nullptr;
        for (auto& [corr, promise] : pending_)
            promise.set_value({{"ok", false}, {"error", "conflict"}, {"message", "simulator disconnected"}});
        pending_.clear();
    }
    run_active_ = false;
    connected_ = false;
}

void Gateway::open_store_locked(const std::filesystem::path& dir)
{
    store_ = EventStore::open(dir);
    view_fold_.emplace(store_->config());
    options_.store_dir = dir;
}

EventStore& Gateway::store_locked()
{
    if (!store_)
    {
        if (!options_.store_dir)
            throw IoError("no store: no simulator has connected and no --store was given");
        open_store_locked(*options_.store_dir);
    }
    return *store_;
}

ViewMeta Gateway::meta_locked() const
{
    ViewMeta m;
    if (store_)
        m.seconds_per_tick = store_->config().seconds_per_tick;
    m.run_active = run_active_;
    m.poll_interval_ms = options_.poll_interval_ms;
    return m;
}

void Gateway::on_hello(const Notification& n)
{
    std::lock_guard lock(store_mutex_);
    if (n.store)
        options_.store_dir = *n.store;
    store_.reset();
    view_fold_.reset();
    auto& store = store_locked();
    view_fold_.emplace(store.config());
    run_active_ = true;
    const auto vm = global_view(view_fold_->snapshot(), meta_locked());
    hub_.reset(Update{0, vm.dump()});
    log_line("simulator connected, store " + options_.store_dir->string());
}

void Gateway::on_transition(const Notification& n)
{
    std::lock_guard lock(store_mutex_);
    auto& store = store_locked();
    store.refresh();
    auto& fold = *view_fold_;
    for (const auto& e : store.events_after(fold.snapshot().last_event_id))
    {
        if (e.event_id > n.event_id)
            break;
        fold.apply(e);
    }
    if (fold.snapshot().last_event_id != n.event_id)
        throw ProtocolError("notified event " + std::to_string(n.event_id) + " is not in the store (last " +
                            std::to_string(fold.snapshot().last_event_id) + ")");
    const auto vm = global_view(fold.snapshot(), meta_locked());
    hub_.broadcast(Update{n.event_id, vm.dump()});
}

void Gateway::on_receipt(const nlohmann::json& msg)
{
    std::lock_guard lock(conn_mutex_);
    const auto corr = msg.value("corr", std::uint64_t{0});
    auto it = pending_.find(corr);
    if (it == pending_.end())
    {
        log_line("receipt for unknown request " + std::to_string(corr));
        return;
    }
    it->second.set_value(msg);
    pending_.erase(it);
}

// --- reads ----------------------------------------------------------------

nlohmann::json Gateway::get_global()
{
    std::lock_guard lock(store_mutex_);
    auto& store = store_locked();
    store.refresh();
    return global_view(store.read_global(), meta_locked());
}

nlohmann::json Gateway::get_node(NodeId node)
{
    std::lock_guard lock(store_mutex_);
    auto& store = store_locked();
    store.refresh();
    return node_view(store.read_node(node), store.read_global());
}

nlohmann::json Gateway::get_event(EventId id)
{
    std::lock_guard lock(store_mutex_);
    auto& store = store_locked();
    store.refresh();
    return event_view(store.read_event(id));
}

nlohmann::json Gateway::health() const
{
    std::lock_guard lock(store_mutex_);
    return {
        {"service", kServiceName},
        {"pid", ::getpid()},
        {"http_port", http_port_},
        {"notify_port", notify_port_},
        {"run_active", run_active_.load()},
        {"connected", connected_.load()},
        {"store", options_.store_dir ? nlohmann::json(options_.store_dir->string()) : nlohmann::json(nullptr)},
        {"broadcasts", hub_.broadcasts()},
        {"subscribers", hub_.subscribers()},
    };
}

// --- injections -----------------------------------------------------------

InjectionReceipt Gateway::post_injection(const FaultSpec& spec)
{
    if (!connected_ || !run_active_)
        throw ConflictError("run ended: no active simulator to inject into");
    {
        std::lock_guard lock(store_mutex_);
        validate(spec, store_locked().config());
    }
    std::future<nlohmann::json> reply;
    {
        std::lock_guard lock(conn_mutex_);
        if (conn_ == nullptr)
            throw ConflictError("run ended: simulator disconnected");
        const auto corr = next_corr_++;
        auto& promise = pending_[corr];
        reply = promise.get_future();
        const nlohmann::json msg{{"kind", "Inject"}, {"corr", corr}, {"fault", to_json(spec)}};
        try
        {
            conn_->send_all(encode_frame(msg));
        }
        catch (const IoError&)
        {
            pending_.erase(corr);
            throw ConflictError("run ended: simulator connection lost");
        }
    }
    if (reply.wait_for(options_.inject_timeout) != std::future_status::ready)
        throw IoError("simulator did not answer the injection request");
    const auto msg = reply.get();
    if (msg.value("ok", false))
        return receipt_from_json(msg.at("receipt"));
    const auto kind = msg.value("error", std::string("invalid_target"));
    const auto text = msg.value("message", std::string("rejected"));
    if (kind == "conflict")
        throw ConflictError(text);
    throw InvalidTarget(text);
}

// --- HTTP -----------------------------------------------------------------

void Gateway::install_routes()
{
    auto& svr = *http_;
    auto send_json = [](httplib::Response& res, const nlohmann::json& j, int status = 200) {
        res.status = status;
        res.set_content(j.dump(), "application/json");
    };
    auto guarded = [this, send_json](auto body) {
        return [this, send_json, body](const httplib::Request& req, httplib::Response& res) {
            try
            {
                body(req, res);
            }
            catch (const NotFound& e)
            {
                send_json(res, {{"error", "not_found"}, {"message", e.what()}}, 404);
            }
            catch (const InvalidTarget& e)
            {
                send_json(res, {{"error", "invalid_target"}, {"message", e.what()}}, 400);
            }
            catch (const ConflictError& e)
            {
                send_json(res, {{"error", "conflict"}, {"message", e.what()}}, 409);
            }
            catch (const std::exception& e)
            {
                send_json(res, {{"error", "unavailable"}, {"message", e.what()}}, 503);
            }
        };
    };
    auto number = [](const std::string& s) -> std::uint64_t {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw NotFound("bad id '" + s + "'");
        return v;
    };

    svr.Get("/api/global", guarded([this, send_json](const httplib::Request&, httplib::Response& res) {
                send_json(res, get_global());
            }));
    svr.Get(R"(/api/node/([^/]+))",
            guarded([this, send_json, number](const httplib::Request& req, httplib::Response& res) {
                const auto n = number(req.matches[1]);
                try
                {
                    send_json(res, get_node(NodeId{static_cast<std::uint32_t>(n)}));
                }
                catch (const InvalidTarget& e)
                {
                    throw NotFound(e.what());
                }
            }));
    svr.Get(R"(/api/event/([^/]+))",
            guarded([this, send_json, number](const httplib::Request& req, httplib::Response& res) {
                send_json(res, get_event(number(req.matches[1])));
            }));
    svr.Get("/api/health", [this, send_json](const httplib::Request&, httplib::Response& res) {
        send_json(res, health());
    });
    svr.Post("/api/inject", guarded([this, send_json](const httplib::Request& req, httplib::Response& res) {
                 nlohmann::json body;
                 try
                 {
                     body = nlohmann::json::parse(req.body);
                 }
                 catch (const nlohmann::json::exception& e)
                 {
                     throw InvalidTarget(std::string("body is not JSON: ") + e.what());
                 }
                 send_json(res, to_json(post_injection(fault_from_json(body))));
             }));
    svr.Get("/api/stream", [this](const httplib::Request&, httplib::Response& res) {
        auto sub = std::make_shared<UpdateHub::Subscription>(hub_.subscribe());
        auto idle = std::make_shared<int>(0);
        res.set_header("Cache-Control", "no-cache");
        res.set_header("X-Accel-Buffering", "no");
        res.set_chunked_content_provider(
            "text/event-stream",
            [this, sub, idle](std::size_t, httplib::DataSink& sink) {
                if (stopping_)
                    return false;
                auto u = sub->next(250ms);
                if (!u)
                {
                    if (sub->closed())
                        return false;
                    if (++*idle < 40)
                        return true;
                    *idle = 0;
                    static const std::string ping = ": keepalive\n\n";
                    return sink.write(ping.data(), ping.size());
                }
                *idle = 0;
                if (u->data.empty())
                    return true;
                const auto msg = "id: " + std::to_string(u->event_id) + "\ndata: " + u->data + "\n\n";
                return sink.write(msg.data(), msg.size());
            },
            [sub](bool) {});
    });
    if (options_.static_dir)
    {
        if (!svr.set_mount_point("/", options_.static_dir->string()))
            log_line("static directory " + options_.static_dir->string() + " not found; serving the API only");
    }
}

} // namespace eftos
