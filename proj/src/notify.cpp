#include "eftos/notify.hpp"

#include <iostream>

namespace eftos {

std::string_view to_string(NotificationKind k)
{
    switch (k)
    {
    case NotificationKind::Hello:
        return "Hello";
    case NotificationKind::Transition:
        return "Transition";
    case NotificationKind::Shutdown:
        return "Shutdown";
    }
    return "?";
}

nlohmann::json to_json(const Notification& n)
{
    nlohmann::json j{{"kind", to_string(n.kind)}, {"event_id", n.event_id}, {"tick", n.tick}};
    if (n.store)
        j["store"] = *n.store;
    return j;
}

Notification notification_from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw ProtocolError("frame without a kind");
    Notification n;
    const auto kind = j["kind"].get<std::string>();
    if (kind == "Hello")
        n.kind = NotificationKind::Hello;
    else if (kind == "Transition")
        n.kind = NotificationKind::Transition;
    else if (kind == "Shutdown")
        n.kind = NotificationKind::Shutdown;
    else
        throw ProtocolError("unknown notification kind '" + kind + "'");
    auto number = [&](const char* key) -> std::uint64_t {
        if (!j.contains(key))
            return 0;
        if (!j[key].is_number_unsigned())
            throw ProtocolError(std::string("field ") + key + " must be a non-negative integer");
        return j[key].get<std::uint64_t>();
    };
    n.event_id = number("event_id");
    n.tick = number("tick");
    if (n.kind == NotificationKind::Transition && n.event_id == 0)
        throw ProtocolError("Transition without an event_id");
    if (j.contains("store") && j["store"].is_string())
        n.store = j["store"].get<std::string>();
    return n;
}

std::string encode_frame(std::string_view payload)
{
    if (payload.size() > kMaxFrameBytes)
        throw ProtocolError("frame too large");
    const auto len = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(4 + payload.size());
    out.push_back(static_cast<char>((len >> 24) & 0xff));
    out.push_back(static_cast<char>((len >> 16) & 0xff));
    out.push_back(static_cast<char>((len >> 8) & 0xff));
    out.push_back(static_cast<char>(len & 0xff));
    out.append(payload);
    return out;
}

std::string encode_frame(const nlohmann::json& j)
{
    return encode_frame(std::string_view(j.dump()));
}

void FrameReader::feed(std::string_view bytes)
{
    buffer_.append(bytes);
}

std::optional<std::string> FrameReader::next()
{
    if (buffer_.size() < 4)
        return std::nullopt;
    const auto b = [&](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[i])); };
    const std::uint32_t len = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
    if (len > kMaxFrameBytes)
        throw ProtocolError("frame of " + std::to_string(len) + " bytes exceeds the limit");
    if (buffer_.size() < 4 + static_cast<std::size_t>(len))
        return std::nullopt;
    std::string payload = buffer_.substr(4, len);
    buffer_.erase(0, 4 + static_cast<std::size_t>(len));
    return payload;
}

// ---------------------------------------------------------------------------

CaptureFileNotifier::CaptureFileNotifier(const std::filesystem::path& file)
    : out_(file, std::ios::binary | std::ios::trunc)
{
    if (!out_)
        throw IoError("cannot write " + file.string());
}

void CaptureFileNotifier::send(const Notification& n)
{
    std::lock_guard lock(mutex_);
    out_ << to_json(n).dump() << '\n';
    out_.flush();
}

TcpNotifier::TcpNotifier(const net::Address& gateway, InjectHandler handler)
    : socket_(net::connect_tcp(gateway)), handler_(std::move(handler))
{
    reader_ = std::thread([this] { reader_loop(); });
}

TcpNotifier::~TcpNotifier()
{
    stopping_ = true;
    socket_.shutdown();
    if (reader_.joinable())
        reader_.join();
}

void TcpNotifier::write_frame(const std::string& frame)
{
    std::lock_guard lock(write_mutex_);
    if (!connected_)
        return;
    try
    {
        socket_.send_all(frame);
    }
    catch (const IoError& e)
    {
        connected_ = false;
        std::cerr << "eftos: gateway connection lost: " << e.what() << "\n";
    }
}

void TcpNotifier::send(const Notification& n)
{
    write_frame(encode_frame(to_json(n)));
}

void TcpNotifier::reader_loop()
{
    FrameReader frames;
    char buf[4096];
    while (!stopping_)
    {
        long n = 0;
        try
        {
            n = socket_.recv_some(buf, sizeof buf, std::chrono::milliseconds(200));
        }
        catch (const IoError&)
        {
            break;
        }
        if (n < 0)
            continue;
        if (n == 0)
            break;
        frames.feed(std::string_view(buf, static_cast<std::size_t>(n)));
        try
        {
            while (auto payload = frames.next())
            {
                const auto msg = nlohmann::json::parse(*payload);
                if (msg.value("kind", "") != "Inject")
                    continue;
                nlohmann::json reply;
                if (handler_)
                    reply = handler_(msg.value("fault", nlohmann::json::object()));
                else
                    reply = {{"ok", false}, {"error", "conflict"}, {"message", "run does not accept injections"}};
                reply["kind"] = "Receipt";
                reply["corr"] = msg.value("corr", 0);
                write_frame(encode_frame(reply));
            }
        }
        catch (const std::exception& e)
        {
            std::cerr << "eftos: bad frame from gateway: " << e.what() << "\n";
            break;
        }
    }
}

// ---------------------------------------------------------------------------

EventId MonitorClient::append(EventRecord record)
{
    const Tick tick = record.tick;
    const EventId id = store_.append(std::move(record));
    notifier_.send(Notification{NotificationKind::Transition, id, tick, std::nullopt});
    return id;
}

void MonitorClient::hello(Tick tick)
{
    std::optional<std::string> dir;
    if (store_.directory())
        dir = std::filesystem::absolute(*store_.directory()).string();
    notifier_.send(Notification{NotificationKind::Hello, 0, tick, dir});
}

void MonitorClient::shutdown(Tick tick)
{
    notifier_.send(Notification{NotificationKind::Shutdown, 0, tick, std::nullopt});
}

} // namespace eftos
