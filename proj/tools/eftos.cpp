#include "eftos/gateway.hpp"
#include "eftos/injector.hpp"
#include "eftos/notify.hpp"
#include "eftos/replay.hpp"
#include "eftos/simulator.hpp"
#include "eftos/store.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

using namespace eftos;
using namespace std::chrono_literals;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitStartup = 2;

std::vector<ThreadId> parse_threads(const std::vector<std::string>& items, const char* flag)
{
    std::vector<ThreadId> out;
    for (const auto& s : items)
    {
        const auto colon = s.find(':');
        try
        {
            if (colon == std::string::npos)
                throw std::invalid_argument(s);
            std::size_t used = 0;
            const auto node = std::stoul(s.substr(0, colon), &used);
            if (used != colon)
                throw std::invalid_argument(s);
            const auto rest = s.substr(colon + 1);
            const auto thread = std::stoul(rest, &used);
            if (used != rest.size())
                throw std::invalid_argument(s);
            out.push_back(ThreadId{NodeId{static_cast<std::uint32_t>(node)}, static_cast<std::uint32_t>(thread)});
        }
        catch (const std::exception&)
        {
            throw ConfigError(std::string(flag) + " expects node:thread, got '" + s + "'");
        }
    }
    return out;
}

std::vector<NodeId> to_nodes(const std::vector<std::uint32_t>& v)
{
    std::vector<NodeId> out;
    for (auto n : v)
        out.push_back(NodeId{n});
    return out;
}

// ---------------------------------------------------------------------------
// Gateway discovery and spawning
// ---------------------------------------------------------------------------

enum class Probe
{
    Nothing,
    Gateway,
    Foreign,
};

Probe probe_gateway(const net::Address& http)
{
    httplib::Client cli(http.host.empty() ? "127.0.0.1" : http.host, http.port);
    cli.set_connection_timeout(0, 300000);
    cli.set_read_timeout(1, 0);
    auto res = cli.Get("/api/health");
    if (!res)
    {
        // Something may still be listening without speaking HTTP.
        try
        {
            net::connect_tcp(http, 300ms);
            return Probe::Foreign;
        }
        catch (const IoError&)
        {
            return Probe::Nothing;
        }
    }
    try
    {
        const auto j = nlohmann::json::parse(res->body);
        if (res->status == 200 && j.value("service", "") == Gateway::kServiceName)
            return Probe::Gateway;
    }
    catch (const nlohmann::json::exception&)
    {
    }
    return Probe::Foreign;
}

void spawn_gateway(const net::Address& http, const net::Address& notify, const std::filesystem::path& log)
{
    const auto self = std::filesystem::read_symlink("/proc/self/exe").string();
    const std::string http_s = http.str();
    const std::string notify_s = notify.str();
    const pid_t child = ::fork();
    if (child < 0)
        throw IoError("fork failed");
    if (child == 0)
    {
        ::setsid();
        if (::fork() != 0)
            ::_exit(0);
        const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        const int null = ::open("/dev/null", O_RDONLY | O_CLOEXEC);
        if (null >= 0)
            ::dup2(null, STDIN_FILENO);
        if (fd >= 0)
        {
            ::dup2(fd, STDOUT_FILENO);
            ::dup2(fd, STDERR_FILENO);
        }
        ::execl(self.c_str(), self.c_str(), "gateway", "--http", http_s.c_str(), "--notify", notify_s.c_str(),
                static_cast<char*>(nullptr));
        ::_exit(127);
    }
    int status = 0;
    ::waitpid(child, &status, 0);
}

void ensure_gateway(const net::Address& http, const net::Address& notify)
{
    switch (probe_gateway(http))
    {
    case Probe::Gateway:
        std::cerr << "eftos: reusing the gateway at " << http.str() << "\n";
        return;
    case Probe::Foreign:
        throw IoError("port " + http.str() + " is taken by something that is not an eftos gateway");
    case Probe::Nothing:
        break;
    }
    const auto log = std::filesystem::temp_directory_path() / ("eftos-gateway-" + std::to_string(http.port) + ".log");
    spawn_gateway(http, notify, log);
    const auto deadline = std::chrono::steady_clock::now() + 5s;
    while (std::chrono::steady_clock::now() < deadline)
    {
        if (probe_gateway(http) == Probe::Gateway)
        {
            std::cerr << "eftos: started a gateway at http://" << http.str() << " (log " << log.string() << ")\n";
            return;
        }
        std::this_thread::sleep_for(50ms);
    }
    throw IoError("gateway did not come up on " + http.str() + "; see " + log.string());
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunOptions
{
    SimConfig config;
    std::vector<std::uint32_t> backups{1};
    std::vector<std::string> unwatched, untrapped;
    std::vector<std::uint32_t> no_rtool;
    std::string store = "eftos-run";
    std::string http = "127.0.0.1:8080";
    std::string notify = "127.0.0.1:7070";
    std::string scenario;
    std::string report;
    bool headless = false;
    std::optional<double> pace;
    Tick ticks = 0;
    Tick window = 50;
};

int run(RunOptions o)
{
    std::vector<ScenarioEntry> scenario;
    std::unique_ptr<EventStore> store;
    std::unique_ptr<Notifier> notifier;
    std::mutex inj_mutex;
    std::unique_ptr<Injector> injector;
    try
    {
        o.config.backup_nodes = to_nodes(o.backups);
        o.config.unwatched_threads = parse_threads(o.unwatched, "--unwatched");
        o.config.untrapped_threads = parse_threads(o.untrapped, "--untrapped");
        o.config.nodes_without_rtool = to_nodes(o.no_rtool);
        o.config.validate();
        const auto http = net::parse_address(o.http);
        const auto notify = net::parse_address(o.notify);
        if (!o.scenario.empty())
        {
            scenario = load_scenario(o.scenario);
            for (const auto& e : scenario)
                try
                {
                    validate(e.spec, o.config);
                }
                catch (const InvalidTarget& err)
                {
                    throw ParseError(e.line, err.what());
                }
        }
        if (!o.headless)
            ensure_gateway(http, notify);
        store = std::make_unique<EventStore>(o.config, o.store);
        if (o.headless)
            notifier = std::make_unique<CaptureFileNotifier>(std::filesystem::path(o.store) / "notifications.jsonl");
        else
            notifier = std::make_unique<TcpNotifier>(notify, [&](const nlohmann::json& fault) {
                std::lock_guard lock(inj_mutex);
                if (!injector)
                    return nlohmann::json{{"ok", false}, {"error", "conflict"}, {"message", "run not started"}};
                return inject_reply(*injector, fault);
            });
    }
    catch (const ParseError& e)
    {
        std::cerr << "eftos: " << o.scenario << ": " << e.what() << "\n";
        return kExitStartup;
    }
    catch (const Error& e)
    {
        std::cerr << "eftos: " << e.what() << "\n";
        return kExitStartup;
    }

    const double pace = o.pace.value_or(o.headless ? 0.0 : o.config.seconds_per_tick);
    MonitorClient client(*store, *notifier);
    client.hello(0);
    Simulator sim(o.config, client);
    InjectorOptions io;
    io.observation_window = o.window;
    if (pace > 0)
        io.before_step = [pace] { std::this_thread::sleep_for(std::chrono::duration<double>(pace)); };
    {
        std::lock_guard lock(inj_mutex);
        injector = std::make_unique<Injector>(sim, *store, io);
    }

    int code = 0;
    if (!scenario.empty())
    {
        const auto report = run_loop(scenario, *injector);
        std::cout << report.table();
        if (!o.report.empty())
            std::ofstream(o.report) << report.to_json().dump(2) << "\n";
        if (!report.all_passed())
            code = kExitFail;
    }
    while (sim.tick() < o.ticks && !sim.failed())
        injector->advance();
    if (sim.failed())
    {
        std::cout << "system failed at tick " << sim.tick() << "\n";
        code = kExitFail;
    }
    client.shutdown(sim.tick());
    {
        std::lock_guard lock(inj_mutex);
        injector.reset();
    }
    std::cout << "run finished at tick " << sim.tick() << ", " << store->last_event_id() << " events in "
              << o.store << "\n";
    return code;
}

// ---------------------------------------------------------------------------
// gateway / inject / replay
// ---------------------------------------------------------------------------

int serve(const std::string& http, const std::string& notify, const std::string& store, const std::string& web,
          int poll_ms)
{
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    try
    {
        GatewayOptions o;
        o.http = net::parse_address(http);
        o.notify = net::parse_address(notify);
        if (!store.empty())
            o.store_dir = std::filesystem::absolute(store);
        if (!web.empty())
            o.static_dir = web;
        o.poll_interval_ms = poll_ms;
        Gateway gw(o);
        gw.start();
        std::cerr << "eftos-gateway: http on port " << gw.http_port() << ", notifications on port "
                  << gw.notify_port() << std::endl;
        int sig = 0;
        sigwait(&set, &sig);
        std::cerr << "eftos-gateway: stopping" << std::endl;
        gw.stop();
    }
    catch (const Error& e)
    {
        std::cerr << "eftos-gateway: " << e.what() << "\n";
        return kExitStartup;
    }
    return 0;
}

int inject(const std::string& http, const std::string& kind, const std::vector<std::uint32_t>& target,
           std::optional<Tick> at, const std::string& id)
{
    nlohmann::json body{{"kind", kind}, {"target", target}};
    if (at)
        body["at_tick"] = *at;
    if (!id.empty())
        body["request_id"] = id;
    try
    {
        const auto addr = net::parse_address(http);
        httplib::Client cli(addr.host.empty() ? "127.0.0.1" : addr.host, addr.port);
        cli.set_read_timeout(10, 0);
        auto res = cli.Post("/api/inject", body.dump(), "application/json");
        if (!res)
        {
            std::cerr << "eftos: no gateway at " << http << "\n";
            return kExitStartup;
        }
        std::cout << res->body << "\n";
        return res->status == 200 ? 0 : kExitFail;
    }
    catch (const Error& e)
    {
        std::cerr << "eftos: " << e.what() << "\n";
        return kExitStartup;
    }
}

int replay_cmd(const std::string& dir)
{
    try
    {
        const auto report = replay(dir);
        std::cout << report.text();
        return report.agree() ? 0 : kExitFail;
    }
    catch (const Error& e)
    {
        std::cerr << "eftos: replay: " << e.what() << "\n";
        return kExitStartup;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"EFTOS DIR-net simulator, monitor gateway and fault injector"};
    app.require_subcommand(1);

    RunOptions ro;
    auto* run_cmd = app.add_subcommand("run", "simulate a run, optionally driven by a scenario");
    run_cmd->add_option("--nodes", ro.config.node_count, "number of nodes")->capture_default_str();
    run_cmd->add_option("--manager", ro.config.manager_node.index, "Manager node")->capture_default_str();
    run_cmd->add_option("--backups", ro.backups, "Backup Agent nodes")->delimiter(',')->capture_default_str();
    run_cmd->add_option("--threads-per-node", ro.config.threads_per_node)->capture_default_str();
    run_cmd->add_option("--seed", ro.config.rng_seed, "seed for component ids")->capture_default_str();
    run_cmd->add_option("--watchdog-timeout", ro.config.watchdog_timeout_ticks, "ticks")->capture_default_str();
    run_cmd->add_option("--recovery-ticks", ro.config.recovery_ticks)->capture_default_str();
    run_cmd->add_option("--seconds-per-tick", ro.config.seconds_per_tick)->capture_default_str();
    run_cmd->add_option("--unwatched", ro.unwatched, "threads without a watchdog, node:thread")->delimiter(',');
    run_cmd->add_option("--untrapped", ro.untrapped, "threads without a trap handler, node:thread")->delimiter(',');
    run_cmd->add_option("--no-rtool", ro.no_rtool, "nodes without a recovery tool")->delimiter(',');
    run_cmd->add_option("--store", ro.store, "store directory (reinitialized)")->capture_default_str();
    run_cmd->add_option("--http", ro.http, "gateway HTTP address")->capture_default_str();
    run_cmd->add_option("--notify", ro.notify, "gateway notification address")->capture_default_str();
    run_cmd->add_option("--scenario", ro.scenario, "scenario file");
    run_cmd->add_option("--report", ro.report, "write the loop report as JSON");
    run_cmd->add_flag("--headless", ro.headless, "no gateway; notifications go to <store>/notifications.jsonl");
    run_cmd->add_option("--ticks", ro.ticks, "keep ticking until this tick")->capture_default_str();
    run_cmd->add_option("--window", ro.window, "observation window W in ticks")->capture_default_str();
    run_cmd->add_option("--pace", ro.pace, "wall seconds per tick (default: 0 headless, else --seconds-per-tick)");

    std::string replay_dir;
    auto* replay_sub = app.add_subcommand("replay", "check a store's snapshot against its event log");
    replay_sub->add_option("dir", replay_dir, "store directory")->required();

    std::string inj_http = "127.0.0.1:8080", inj_kind, inj_id;
    std::vector<std::uint32_t> inj_target;
    std::optional<Tick> inj_at;
    auto* inject_sub = app.add_subcommand("inject", "send one fault to a live gateway");
    inject_sub->add_option("--http", inj_http)->capture_default_str();
    inject_sub->add_option("--kind", inj_kind, "trap-divzero, trap-segv, link-down, reboot, kill-thread, watchdog-timeout")
        ->required();
    inject_sub->add_option("--target", inj_target, "target indices, e.g. 2,0")->delimiter(',')->required();
    inject_sub->add_option("--at", inj_at, "tick (default: next tick)");
    inject_sub->add_option("--id", inj_id, "request id");

    std::string gw_http = "127.0.0.1:8080", gw_notify = "127.0.0.1:7070", gw_store, gw_static;
    int gw_poll = 2000;
    auto* gateway_sub = app.add_subcommand("gateway", "serve the monitor API until SIGINT/SIGTERM");
    gateway_sub->add_option("--http", gw_http)->envname("EFTOS_HTTP")->capture_default_str();
    gateway_sub->add_option("--notify", gw_notify)->envname("EFTOS_NOTIFY")->capture_default_str();
    gateway_sub->add_option("--store", gw_store, "store to serve before a simulator connects")->envname("EFTOS_STORE");
    gateway_sub->add_option("--static", gw_static, "directory of the web UI build")->envname("EFTOS_STATIC");
    gateway_sub->add_option("--poll-interval-ms", gw_poll, "polling interval suggested to clients")
        ->envname("EFTOS_POLL_INTERVAL_MS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitStartup;
    }

    if (*run_cmd)
        return run(std::move(ro));
    if (*replay_sub)
        return replay_cmd(replay_dir);
    if (*inject_sub)
        return inject(inj_http, inj_kind, inj_target, inj_at, inj_id);
    return serve(gw_http, gw_notify, gw_store, gw_static, gw_poll);
}
