#pragma once

#include "eftos/event.hpp"
#include "eftos/net.hpp"
#include "eftos/store.hpp"

#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace eftos {

// ---------------------------------------------------------------------------
// Wire format
//
// Frame = 4-byte big-endian payload length + UTF-8 JSON payload. The simulator
// sends Hello once, then one Transition per appended event, then Shutdown:
//   {"kind":"Hello","event_id":0,"tick":0,"store":"/path"}
//   {"kind":"Transition","event_id":17,"tick":9}
//   {"kind":"Shutdown","event_id":0,"tick":40}
// The same connection carries injection requests the other way:
//   gateway -> simulator  {"kind":"Inject","corr":3,"fault":{...}}
//   simulator -> gateway  {"kind":"Receipt","corr":3,"ok":true,"receipt":{...}}
//                         {"kind":"Receipt","corr":3,"ok":false,"error":"invalid_target","message":"..."}
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxFrameBytes = 1u << 20;

enum class NotificationKind : std::uint8_t
{
    Hello,
    Transition,
    Shutdown,
};

std::string_view to_string(NotificationKind k);

struct Notification
{
    NotificationKind kind = NotificationKind::Transition;
    EventId event_id = 0;
    Tick tick = 0;
    std::optional<std::string> store;  // Hello only: the store directory

    friend bool operator==(const Notification&, const Notification&) = default;
};

nlohmann::json to_json(const Notification& n);
/// Throws ProtocolError.
Notification notification_from_json(const nlohmann::json& j);

std::string encode_frame(std::string_view payload);
std::string encode_frame(const nlohmann::json& j);
inline std::string encode_frame(const std::string& payload) { return encode_frame(std::string_view(payload)); }
inline std::string encode_frame(const char* payload) { return encode_frame(std::string_view(payload)); }

/// Splits a byte stream into frame payloads.
class FrameReader
{
public:
    void feed(std::string_view bytes);
    /// Next complete payload, if any. Throws ProtocolError on an oversized frame.
    std::optional<std::string> next();
    bool empty() const noexcept { return buffer_.empty(); }

private:
    std::string buffer_;
};

// ---------------------------------------------------------------------------
// Notifiers (simulator side)
// ---------------------------------------------------------------------------

class Notifier
{
public:
    virtual ~Notifier() = default;
    virtual void send(const Notification& n) = 0;
};

class NullNotifier final : public Notifier
{
public:
    void send(const Notification&) override {}
};

/// Headless mode: one JSON line per notification.
class CaptureFileNotifier final : public Notifier
{
public:
    explicit CaptureFileNotifier(const std::filesystem::path& file);
    void send(const Notification& n) override;

private:
    std::mutex mutex_;
    std::ofstream out_;
};

/// Connects to a gateway's notification port. Injection requests arriving on
/// the same connection are passed to the handler on a reader thread; the
/// handler's JSON reply goes back as the Receipt frame.
class TcpNotifier final : public Notifier
{
public:
    using InjectHandler = std::function<nlohmann::json(const nlohmann::json& fault)>;

    /// Throws IoError if the gateway does not accept.
    explicit TcpNotifier(const net::Address& gateway, InjectHandler handler = {});
    ~TcpNotifier() override;

    /// Failures after connecting are logged once and the notifier goes quiet.
    void send(const Notification& n) override;
    bool connected() const noexcept { return connected_; }

private:
    void reader_loop();
    void write_frame(const std::string& frame);

    net::Socket socket_;
    InjectHandler handler_;
    std::mutex write_mutex_;
    std::atomic<bool> connected_{true};
    std::atomic<bool> stopping_{false};
    std::thread reader_;
};

/// The client module: every event goes to the store first and then rings the
/// doorbell, so a notified reader always finds the event on disk.
class MonitorClient final : public EventSink
{
public:
    MonitorClient(EventStore& store, Notifier& notifier) : store_(store), notifier_(notifier) {}

    EventId append(EventRecord record) override;

    void hello(Tick tick);
    void shutdown(Tick tick);

private:
    EventStore& store_;
    Notifier& notifier_;
};

} // namespace eftos
